#include "smokesplat/enhance.hpp"

#include "smokesplat/eval.hpp"
#include "smokesplat/hash.hpp"
#include "smokesplat/image_io.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <vector>

namespace smokesplat::enhance {
namespace {

double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// Temporary file removed on scope exit.
class TempFile {
public:
    TempFile() {
        auto pattern = (std::filesystem::temp_directory_path() / "smokesplat-XXXXXX").string();
        std::vector<char> buf(pattern.begin(), pattern.end());
        buf.push_back('\0');
        const int fd = ::mkstemp(buf.data());
        if (fd < 0) throw Error("cannot create temporary file");
        ::close(fd);
        path_ = buf.data();
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct CommandResult {
    int exit_code = -1;
    std::vector<std::uint8_t> output;
};

CommandResult run_filter_command(const std::string& command, std::span<const std::uint8_t> input) {
    TempFile in_file;
    TempFile out_file;
    {
        std::ofstream f(in_file.path(), std::ios::binary);
        f.write(reinterpret_cast<const char*>(input.data()), static_cast<std::streamsize>(input.size()));
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw Error("fork failed");
    if (pid == 0) {
        const int in_fd = ::open(in_file.path().c_str(), O_RDONLY);
        const int out_fd = ::open(out_file.path().c_str(), O_WRONLY | O_TRUNC);
        if (in_fd < 0 || out_fd < 0) ::_exit(127);
        ::dup2(in_fd, STDIN_FILENO);
        ::dup2(out_fd, STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw Error("waitpid failed");
    }
    CommandResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream f(out_file.path(), std::ios::binary);
    result.output.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    return result;
}

}  // namespace

const char* to_string(RestoreStageKind kind) {
    switch (kind) {
        case RestoreStageKind::identity: return "identity";
        case RestoreStageKind::gray_world_stretch: return "gray_world_stretch";
        case RestoreStageKind::external_command: return "external_command";
    }
    return "unknown";
}

RestoreStageKind restore_kind_from_string(const std::string& name) {
    if (name == "identity") return RestoreStageKind::identity;
    if (name == "gray_world_stretch") return RestoreStageKind::gray_world_stretch;
    if (name == "external_command") return RestoreStageKind::external_command;
    throw InvalidArgument("unknown restore stage kind '" + name + "'");
}

Image gray_world_stretch(const Image& img) {
    const auto d = img.data();
    const std::size_t n = img.pixel_count();
    if (n == 0) return img;

    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c) mean[c] += d[3 * i + c];
    for (double& m : mean) m /= static_cast<double>(n);
    const double joint = (mean[0] + mean[1] + mean[2]) / 3.0;
    std::array<double, 3> gain{};
    for (int c = 0; c < 3; ++c) gain[c] = mean[c] > 0.0 ? joint / mean[c] : 1.0;

    std::vector<double> balanced(d.size());
    std::vector<double> luma(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) balanced[3 * i + c] = d[3 * i + c] * gain[c];
        luma[i] = kLumaR * balanced[3 * i] + kLumaG * balanced[3 * i + 1] + kLumaB * balanced[3 * i + 2];
    }
    const double p1 = percentile(luma, 0.01);
    const double p99 = percentile(std::move(luma), 0.99);
    if (p99 - p1 > 1e-12) {
        const double scale = 1.0 / (p99 - p1);
        for (double& v : balanced) v = (v - p1) * scale;
    }
    return Image(img.width(), img.height(), std::move(balanced));
}

Image restore_stage(const Image& img, const RestoreStage& stage, const std::string& view) {
    switch (stage.kind) {
        case RestoreStageKind::identity: return img;
        case RestoreStageKind::gray_world_stretch: return gray_world_stretch(img);
        case RestoreStageKind::external_command: {
            if (stage.command.empty()) throw StageError(view, "external_command restore stage has no command");
            const auto result = run_filter_command(stage.command, encode_png(img));
            if (result.exit_code != 0) {
                throw StageError(view, "restore command exited with status " + std::to_string(result.exit_code));
            }
            Image out;
            try {
                out = decode_image(result.output, "restore command output");
            } catch (const Error& e) {
                throw StageError(view, std::string("restore command produced a bad image: ") + e.what());
            }
            if (!out.same_shape(img)) throw StageError(view, "restore command changed the image dimensions");
            return out;
        }
    }
    return img;
}

EnhancePrompt::EnhancePrompt(std::string t) : text(std::move(t)) {
    if (text.empty()) throw InvalidArgument("enhancement prompt must not be empty");
}

EnhancePrompt EnhancePrompt::default_prompt() {
    return EnhancePrompt(
        "Improve the visibility of this smoke-degraded photograph. Keep the scene geometry, the spatial layout, "
        "object boundaries and local structures exactly where they are. You may remove haze, reduce noise and "
        "recover moderate detail, but do not add, remove, move or reshape anything in the scene.");
}

std::string EnhanceRequest::to_json() const {
    return nlohmann::json{{"model", model}, {"prompt", prompt}, {"image_b64", image_b64}}.dump();
}

EnhanceRequest EnhanceRequest::from_json(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return {j.at("model").get<std::string>(), j.at("prompt").get<std::string>(),
                j.at("image_b64").get<std::string>()};
    } catch (const nlohmann::json::exception& e) {
        throw EnhanceError(EnhanceErrorKind::malformed_response, std::string("bad request body: ") + e.what());
    }
}

std::string EnhanceResponse::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (image_b64) j["image_b64"] = *image_b64;
    if (error) j["error"] = *error;
    return j.dump();
}

EnhanceResponse EnhanceResponse::from_json(const std::string& body) {
    EnhanceResponse r;
    try {
        const auto j = nlohmann::json::parse(body);
        if (j.contains("image_b64")) r.image_b64 = j.at("image_b64").get<std::string>();
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw EnhanceError(EnhanceErrorKind::malformed_response, std::string("bad response body: ") + e.what());
    }
    if (r.image_b64.has_value() == r.error.has_value()) {
        throw EnhanceError(EnhanceErrorKind::malformed_response, "response must carry exactly one of image_b64, error");
    }
    return r;
}

Image mock_enhance(const Image& img, const MockParams& params) {
    if (!(params.gamma > 0.0) || !(params.gain > 0.0)) throw InvalidArgument("mock_enhance: gamma and gain must be > 0");
    const auto d = img.data();
    std::vector<double> out(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i] = std::clamp(std::pow(d[i], params.gamma) * params.gain, 0.0, 1.0);
    }
    return Image(img.width(), img.height(), std::move(out));
}

EnhanceResponse TransformClient::send(const EnhanceRequest& request) {
    const auto bytes = base64_decode(request.image_b64);
    const Image out = fn_(decode_image(bytes, "enhance request"));
    EnhanceResponse r;
    r.image_b64 = base64_encode(encode_png(out));
    return r;
}

std::string request_key(const EnhanceRequest& request) { return sha256_hex(request.to_json()); }

GateResult structure_gate(const Image& original, const Image& candidate, const GateConfig& gate) {
    require_same_shape(original, candidate, "structure_gate");
    const double s = eval::ssim(original, candidate);
    return {s >= gate.ssim_threshold, s};
}

EnhanceOutcome enhance_image(const Image& img, const EnhancePrompt& prompt, EnhanceClient& client,
                             const GateConfig& gate, const std::string& model) {
    EnhanceRequest request{model, prompt.text, base64_encode(encode_png(img))};
    const EnhanceResponse response = client.send(request);
    if (response.error) throw EnhanceError(EnhanceErrorKind::service_error, "enhancement service: " + *response.error);
    if (!response.image_b64) throw EnhanceError(EnhanceErrorKind::malformed_response, "response carries no image");

    Image candidate;
    try {
        candidate = decode_image(base64_decode(*response.image_b64), "enhance response");
    } catch (const Error& e) {
        throw EnhanceError(EnhanceErrorKind::malformed_response, std::string("undecodable response image: ") + e.what());
    }
    if (!candidate.same_shape(img)) {
        throw EnhanceError(EnhanceErrorKind::dimension_mismatch,
                           "enhanced image is " + std::to_string(candidate.width()) + "x" +
                               std::to_string(candidate.height()) + ", expected " + std::to_string(img.width()) +
                               "x" + std::to_string(img.height()));
    }
    const GateResult verdict = structure_gate(img, candidate, gate);
    if (!verdict.accepted) {
        spdlog::warn("structure gate rejected enhancement (ssim {:.4f} < {:.4f}); keeping input", verdict.ssim,
                     gate.ssim_threshold);
        return {img, verdict};
    }
    return {std::move(candidate), verdict};
}

}  // namespace smokesplat::enhance
