#pragma once

#include "smokesplat/camera.hpp"
#include "smokesplat/image.hpp"
#include "smokesplat/splat/projection.hpp"
#include "smokesplat/splat/scene.hpp"

#include <vector>

namespace smokesplat::splat {

struct RenderOutput {
    Image image;
    /// Transmittance left after the last splat (weight of the background).
    GrayMap final_transmittance;
    /// Sum of alpha_i T_i over contributing splats.
    GrayMap splat_weight;
    /// Composited camera-space depth, with `background_depth` weighted by the
    /// final transmittance.
    GrayMap depth;
    /// Number of splats composited per pixel.
    std::vector<int> contributors;
};

/// Front-to-back alpha compositing of depth-sorted splats (global sort,
/// ties by index), each evaluated inside its cutoff box only.
RenderOutput render_detailed(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings = {},
                             double background_depth = 0.0);

Image render(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings = {});

struct BackwardResult {
    double loss = 0.0;
    Image rendered;
    SceneGradients gradients;
};

/// Renders, evaluates (1 - lambda) L1 + lambda (1 - SSIM) against `target`
/// and returns the exact gradient for every Gaussian parameter and the
/// background. Clamped alphas and culled or skipped splats get zero gradient.
BackwardResult backward(const GaussianScene& scene, const CameraView& cam, const Image& target, double lambda,
                        const RenderSettings& settings = {});

}  // namespace smokesplat::splat
