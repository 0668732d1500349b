#pragma once

#include "smokesplat/dehaze.hpp"
#include "smokesplat/enhance.hpp"
#include "smokesplat/ensemble.hpp"
#include "smokesplat/error.hpp"
#include "smokesplat/splat/optimizer.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace smokesplat::pipeline {

/// Malformed or invalid configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

enum class Preset { desk, paper };

const char* to_string(Preset p);
Preset preset_from_string(const std::string& name);

enum class EnhanceMode { mock, http, replay };

struct RestoreSection {
    bool enabled = true;
    enhance::RestoreStage stage;
};

struct DehazeSection {
    bool enabled = true;
    dehaze::DehazeParams params;
};

struct EnhanceSection {
    bool enabled = true;
    EnhanceMode mode = EnhanceMode::mock;
    std::string prompt = enhance::EnhancePrompt::default_prompt().text;
    std::string model = enhance::kDefaultModel;
    enhance::MockParams mock;
    enhance::GateConfig gate;
    std::string endpoint;
    std::filesystem::path replay_dir;
    std::size_t concurrency = 1;
};

struct EnsembleSection {
    std::size_t runs = 8;
    std::uint64_t base_seed = 0;
    std::size_t workers = 1;
};

struct EvalSection {
    bool enabled = true;
    std::string method = "smokesplat";
};

/// Every stage parameter of one pipeline invocation.
///
/// The file is INI-style with [pipeline], [restore], [dehaze], [enhance],
/// [optimize], [ensemble] and [eval] sections; unknown sections or keys are
/// rejected. The preset supplies iteration and run counts (desk: 2000 and 8,
/// paper: 30000 and 91); explicit `iterations` / `runs` keys override it.
struct PipelineConfig {
    std::filesystem::path dataset;
    std::filesystem::path output;
    /// Shared stage cache; defaults to <output>/cache.
    std::optional<std::filesystem::path> cache_root;
    Preset preset = Preset::desk;
    std::size_t workers = 1;

    RestoreSection restore;
    DehazeSection dehaze;
    EnhanceSection enhance;
    splat::OptimConfig optimize;
    EnsembleSection ensemble;
    EvalSection eval;

    /// Throws ConfigError.
    void validate() const;
    /// Canonical text of everything that affects results; paths, worker
    /// counts and concurrency limits are excluded.
    std::string canonical() const;
    std::filesystem::path effective_cache_root() const;
};

struct PresetValues {
    int iterations;
    std::size_t runs;
};
PresetValues preset_values(Preset p);

/// Parses a config file. `preset_override` (from the command line) replaces
/// the file's preset before explicit keys are applied. Relative paths resolve
/// against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path, std::optional<Preset> preset_override = std::nullopt);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            std::optional<Preset> preset_override = std::nullopt);

/// Defaults for a preset with no file.
PipelineConfig default_config(Preset preset = Preset::desk);

}  // namespace smokesplat::pipeline
