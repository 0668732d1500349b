#pragma once

#include "smokesplat/camera.hpp"
#include "smokesplat/image.hpp"
#include "smokesplat/splat/mcmc.hpp"
#include "smokesplat/splat/projection.hpp"
#include "smokesplat/splat/scene.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace smokesplat::splat {

struct PosedImage {
    Image image;
    CameraView camera;
};

struct LearningRates {
    /// Position rate in units of the scene extent; decays log-linearly to
    /// `position_final` over the run.
    double position = 1.6e-3;
    double position_final = 1.6e-5;
    double log_scale = 5e-3;
    double rotation = 1e-3;
    double opacity = 5e-2;
    double color = 2.5e-3;
    double background = 2.5e-3;
};

struct OptimConfig {
    int iterations = 2000;
    std::size_t budget = 200;
    LearningRates lr;
    /// Run relocation every this many iterations (0 disables it).
    int relocation_interval = 100;
    /// No relocation after this fraction of the run.
    double relocation_until = 0.75;
    double dead_opacity = 0.005;
    double opacity_reg = 0.01;
    double scale_reg = 0.01;
    /// Initial exploration noise; decays linearly to zero at the last iteration.
    double noise_scale = 0.1;
    double lambda = 0.2;
    std::uint64_t seed = 0;
    /// Half-size of the initialization cube around the cameras' common focus,
    /// as a fraction of the mean camera distance.
    double init_extent = 0.5;
    Eigen::Vector3d initial_background = Eigen::Vector3d::Zero();
    bool learn_background = true;
    RenderSettings render;

    void validate() const;
};

/// Called after every iteration with the 1-based iteration and its loss.
using ProgressFn = std::function<void(int iteration, double loss)>;

/// Fits a fixed-budget scene to the posed images. Views are visited round
/// robin; relocation runs on its interval. The result depends only on the
/// views and the configuration (including the seed).
///
/// Without `initial`, Gaussians are placed by rejection sampling inside the
/// intersection of the view frusta (or at `init_points` when given), coloured
/// by the mean of the pixels they project to, with opacity 0.5 and an
/// isotropic scale equal to the nearest-neighbour spacing.
GaussianScene optimize(const std::vector<PosedImage>& views, const OptimConfig& cfg,
                       const std::optional<GaussianScene>& initial = std::nullopt,
                       const std::optional<std::vector<Eigen::Vector3d>>& init_points = std::nullopt,
                       const ProgressFn& progress = {});

/// Initialization used by optimize().
GaussianScene initialize_scene(const std::vector<PosedImage>& views, const OptimConfig& cfg, Rng& rng,
                               const std::optional<std::vector<Eigen::Vector3d>>& init_points = std::nullopt);

/// Point closest (least squares) to every camera's optical axis, and the mean
/// camera distance to it.
struct SceneFocus {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double extent = 1.0;
};
SceneFocus scene_focus(const std::vector<CameraView>& cameras);

}  // namespace smokesplat::splat
