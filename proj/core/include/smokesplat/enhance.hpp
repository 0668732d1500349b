#pragma once

#include "smokesplat/error.hpp"
#include "smokesplat/image.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace smokesplat::enhance {

// ---------------------------------------------------------------------------
// Preliminary restoration
// ---------------------------------------------------------------------------

enum class RestoreStageKind { identity, gray_world_stretch, external_command };

const char* to_string(RestoreStageKind kind);
RestoreStageKind restore_kind_from_string(const std::string& name);

struct RestoreStage {
    RestoreStageKind kind = RestoreStageKind::gray_world_stretch;
    /// Shell command for external_command: reads PNG on stdin, writes PNG on stdout.
    std::string command;
};

class StageError : public Error {
public:
    StageError(const std::string& view, const std::string& detail)
        : Error("view '" + view + "': " + detail), view_(view) {}
    const std::string& view() const noexcept { return view_; }

private:
    std::string view_;
};

/// Equalizes channel means to their joint mean, then stretches the 1st/99th
/// luminance percentiles to 0/1. A flat luminance distribution skips the stretch.
Image gray_world_stretch(const Image& img);

/// Throws StageError (naming `view`) when an external command fails.
Image restore_stage(const Image& img, const RestoreStage& stage, const std::string& view = "<image>");

// ---------------------------------------------------------------------------
// Enhancement service
// ---------------------------------------------------------------------------

struct EnhancePrompt {
    std::string text;

    explicit EnhancePrompt(std::string t);
    static EnhancePrompt default_prompt();
};

inline constexpr const char* kDefaultModel = "gpt-image-1.5";

struct EnhanceRequest {
    std::string model;
    std::string prompt;
    std::string image_b64;

    std::string to_json() const;
    static EnhanceRequest from_json(const std::string& body);
};

struct EnhanceResponse {
    std::optional<std::string> image_b64;
    std::optional<std::string> error;

    std::string to_json() const;
    /// Throws EnhanceError(malformed_response) on bad bodies.
    static EnhanceResponse from_json(const std::string& body);
};

enum class EnhanceErrorKind { transport, malformed_response, service_error, dimension_mismatch };

class EnhanceError : public Error {
public:
    EnhanceError(EnhanceErrorKind kind, const std::string& detail) : Error(detail), kind_(kind) {}
    EnhanceErrorKind kind() const noexcept { return kind_; }

private:
    EnhanceErrorKind kind_;
};

/// Request/response transport for the enhancement model.
class EnhanceClient {
public:
    virtual ~EnhanceClient() = default;
    virtual EnhanceResponse send(const EnhanceRequest& request) = 0;
};

struct MockParams {
    double gamma = 1.0;
    double gain = 1.0;
};

/// clamp(v^gamma * gain) per channel.
Image mock_enhance(const Image& img, const MockParams& params);

/// Applies an in-process image transform behind the wire format.
class TransformClient : public EnhanceClient {
public:
    explicit TransformClient(std::function<Image(const Image&)> fn) : fn_(std::move(fn)) {}
    EnhanceResponse send(const EnhanceRequest& request) override;

private:
    std::function<Image(const Image&)> fn_;
};

class MockClient : public TransformClient {
public:
    explicit MockClient(MockParams params)
        : TransformClient([params](const Image& img) { return mock_enhance(img, params); }) {}
};

struct HttpClientOptions {
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/enhance
    std::string api_key;
    int retries = 3;
    std::chrono::milliseconds initial_backoff{250};
    std::chrono::seconds timeout{120};

    /// Reads SMOKESPLAT_ENHANCE_URL and SMOKESPLAT_ENHANCE_KEY.
    static HttpClientOptions from_environment();
};

/// POSTs the request body as JSON; retries transport failures and 5xx
/// responses with exponential backoff.
class HttpClient : public EnhanceClient {
public:
    explicit HttpClient(HttpClientOptions options);
    EnhanceResponse send(const EnhanceRequest& request) override;

private:
    HttpClientOptions options_;
    std::string scheme_host_;
    std::string path_;
};

/// Key under which a request is recorded: sha256 of its JSON body.
std::string request_key(const EnhanceRequest& request);

/// Serves responses recorded as `<dir>/<request_key>.json`.
class ReplayClient : public EnhanceClient {
public:
    explicit ReplayClient(std::filesystem::path dir) : dir_(std::move(dir)) {}
    EnhanceResponse send(const EnhanceRequest& request) override;

private:
    std::filesystem::path dir_;
};

/// Forwards to another client and records every response for replay.
class RecordingClient : public EnhanceClient {
public:
    RecordingClient(EnhanceClient& inner, std::filesystem::path dir) : inner_(inner), dir_(std::move(dir)) {}
    EnhanceResponse send(const EnhanceRequest& request) override;

private:
    EnhanceClient& inner_;
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Structure gate
// ---------------------------------------------------------------------------

enum class RejectAction { fallback_to_input };

struct GateConfig {
    double ssim_threshold = 0.6;
    RejectAction action_on_reject = RejectAction::fallback_to_input;
};

struct GateResult {
    bool accepted = false;
    double ssim = 0.0;
};

/// Accepts iff SSIM(luminance(original), luminance(candidate)) >= threshold.
GateResult structure_gate(const Image& original, const Image& candidate, const GateConfig& gate);

struct EnhanceOutcome {
    Image image;
    GateResult gate;
};

/// Sends one image through `client`; a size change is an error, a gate
/// rejection returns the input unchanged.
EnhanceOutcome enhance_image(const Image& img, const EnhancePrompt& prompt, EnhanceClient& client,
                             const GateConfig& gate, const std::string& model = kDefaultModel);

}  // namespace smokesplat::enhance
