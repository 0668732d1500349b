#pragma once

#include "smokesplat/error.hpp"
#include "smokesplat/eval.hpp"
#include "smokesplat/pipeline/config.hpp"
#include "smokesplat/pipeline/stage_cache.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace smokesplat::pipeline {

/// Process exit codes of the command-line tool.
enum class ExitCode : int {
    success = 0,
    config_error = 2,
    stage_failure = 3,
    cache_corruption = 4,
};

/// A stage failed; names the stage, the view (when one is to blame) and the cause.
class PipelineError : public Error {
public:
    PipelineError(std::string stage, std::string view, const std::string& cause)
        : Error("stage '" + stage + "'" + (view.empty() ? std::string() : ", view '" + view + "'") + ": " + cause),
          stage_(std::move(stage)),
          view_(std::move(view)) {}

    const std::string& stage() const noexcept { return stage_; }
    const std::string& view() const noexcept { return view_; }

private:
    std::string stage_;
    std::string view_;
};

/// Stages in execution order.
inline const std::vector<std::string> kStageNames = {"restore", "dehaze", "enhance", "ensemble", "eval"};

enum class StageStatus { computed, cached, skipped };
const char* to_string(StageStatus s);

struct StageRecord {
    std::string name;
    StageStatus status = StageStatus::skipped;
    std::string key;
    /// Cache entry directory, relative to the output directory.
    std::string dir;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    double seconds = 0.0;
};

/// Provenance of one pipeline execution.
struct RunManifest {
    std::string tool_version;
    std::string config_hash;
    std::string preset;
    std::vector<std::uint64_t> seeds;
    std::vector<StageRecord> stages;
    /// Files under the output directory (relative path -> sha256), excluding
    /// the manifest itself and the cache.
    std::map<std::string, std::string> outputs;
    std::optional<eval::MetricReport> metrics;
    /// Mean PSNR over target views of each individual run.
    std::vector<double> run_psnr_db;
    double total_seconds = 0.0;

    const StageRecord* stage(const std::string& name) const;
    nlohmann::json to_json() const;
    /// Hash of everything except timings, statuses and paths; equal for
    /// identical configs, seeds and inputs.
    std::string fingerprint() const;
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Runs restore -> dehaze -> enhance -> ensemble -> eval, reusing cached stage
/// outputs whose inputs and parameters are unchanged, and writes
/// `<output>/final/<view>.png`, the reports and `<output>/manifest.json`.
///
/// Throws ConfigError, PipelineError or CacheCorruption.
RunManifest run_pipeline(const PipelineConfig& cfg);

/// Problems found re-hashing every file a manifest references; empty when
/// the manifest is complete and consistent.
std::vector<std::string> verify_manifest(const std::filesystem::path& output_dir);

struct AblationReport {
    std::string stage;
    eval::MetricReport full;
    eval::MetricReport ablated;
    /// full minus ablated.
    double delta_psnr_db = 0.0;
    double delta_ssim = 0.0;
    RunManifest full_manifest;
    RunManifest ablated_manifest;
};

/// Runs the pipeline with and without `stage` (restore, dehaze, enhance, or
/// ensemble, where ablation means a single run) on the same seeds, under
/// `<output>/ablate_<stage>/{full,ablated}` with a shared cache. Writes
/// ablation.md and ablation.json next to them.
AblationReport ablate(const PipelineConfig& cfg, const std::string& stage);

std::string to_markdown(const AblationReport& report);

}  // namespace smokesplat::pipeline
