#pragma once

#include "smokesplat/camera.hpp"
#include "smokesplat/splat/scene.hpp"

#include <Eigen/Core>

namespace smokesplat::splat {

/// Rasterization numerics shared by projection, forward and backward passes.
struct RenderSettings {
    double alpha_max = 0.995;
    double alpha_min = 1.0 / 255.0;
    /// Half-extent of the evaluation box, in standard deviations of the
    /// projected footprint's major axis.
    double cutoff_sigma = 3.0;
    /// Anti-aliasing floor added to the 2-D covariance diagonal (px^2).
    double cov_floor = 0.3;
    double z_near = 0.01;
};

/// Screen-space footprint of a Gaussian.
struct Splat2D {
    Eigen::Vector2d mean2d = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity();
    double depth = 0.0;
    bool culled = true;
};

/// EWA projection: cov2d = J W Sigma W^T J^T + floor * I, with J the
/// perspective Jacobian at the camera-space centre.
Splat2D project_gaussian(const Gaussian& g, const CameraView& cam, const RenderSettings& settings = {});

/// Gradient of a scalar with respect to the Gaussian's geometric parameters,
/// given its gradient with respect to mean2d and cov2d. `d_cov2d` is the full
/// (symmetric) matrix gradient. Only position, log_scale and rotation of the
/// result are written.
Gaussian project_gaussian_backward(const Gaussian& g, const CameraView& cam, const Eigen::Vector2d& d_mean2d,
                                   const Eigen::Matrix2d& d_cov2d);

}  // namespace smokesplat::splat
