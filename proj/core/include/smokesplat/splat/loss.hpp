#pragma once

#include "smokesplat/image.hpp"

#include <vector>

namespace smokesplat::splat {

inline constexpr double kDefaultLossLambda = 0.2;

/// (1 - lambda) * mean |rendered - target| + lambda * (1 - SSIM(rendered, target)).
/// SSIM is skipped entirely when lambda == 0, so tiny rasters are allowed then.
double loss(const Image& rendered, const Image& target, double lambda);

struct LossGradient {
    double value = 0.0;
    /// d loss / d rendered channel, interleaved RGB like Image::data().
    std::vector<double> d_rendered;
};

/// The L1 term uses sign(0) = 0.
LossGradient loss_with_gradient(const Image& rendered, const Image& target, double lambda);

}  // namespace smokesplat::splat
