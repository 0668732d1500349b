#pragma once

#include "smokesplat/camera.hpp"
#include "smokesplat/error.hpp"
#include "smokesplat/image.hpp"
#include "smokesplat/splat/optimizer.hpp"
#include "smokesplat/splat/scene.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace smokesplat::ensemble {

struct EnsembleConfig {
    std::size_t n_runs = 8;
    std::uint64_t base_seed = 0;
    /// Concurrent runs; results do not depend on it.
    std::size_t workers = 1;
    /// Explicit per-run seeds; when non-empty it overrides base_seed + k and
    /// must have n_runs entries.
    std::vector<std::uint64_t> seeds;
    bool keep_scenes = false;

    void validate() const;
    /// Seed of run k (0-based): base_seed + k unless overridden.
    std::uint64_t seed_for(std::size_t k) const;
};

/// Rendered target views of every run: views[k][j] is view j of run k.
struct RunSet {
    std::vector<std::vector<Image>> views;
    std::vector<std::uint64_t> seeds;
    std::vector<splat::GaussianScene> scenes;

    std::size_t runs() const noexcept { return views.size(); }
    std::size_t targets() const noexcept { return views.empty() ? 0 : views.front().size(); }
    /// Throws DimensionMismatch unless the grid is complete and every view j
    /// has the same size in every run.
    void validate() const;
};

class RunError : public Error {
public:
    RunError(std::size_t run, const std::string& detail)
        : Error("run " + std::to_string(run) + ": " + detail), run_(run) {}
    std::size_t run() const noexcept { return run_; }

private:
    std::size_t run_;
};

/// Runs the optimizer once per seed and renders every target camera.
RunSet run_ensemble(const std::vector<splat::PosedImage>& views, const splat::OptimConfig& opt_cfg,
                    const EnsembleConfig& ens_cfg, const std::vector<CameraView>& targets);

/// Per-pixel mean over runs, accumulated in run order with Neumaier
/// compensation.
std::vector<Image> average_views(const RunSet& runs);

struct VarianceMap {
    /// Population variance across runs averaged over channels, divided by its max.
    GrayMap normalized;
    double max_variance = 0.0;
};

/// Requires at least two runs.
VarianceMap variance_map(const RunSet& runs, std::size_t view_index);

}  // namespace smokesplat::ensemble
