#pragma once

#include "smokesplat/rng.hpp"
#include "smokesplat/splat/adam.hpp"
#include "smokesplat/splat/scene.hpp"

#include <cstddef>
#include <vector>

namespace smokesplat::splat {

struct RelocationConfig {
    /// Gaussians below this opacity are recycled.
    double dead_opacity = 0.005;
    /// Position noise std = noise_scale * (1 - opacity) * exp(mean log_scale).
    double noise_scale = 0.0;
};

struct RelocationStats {
    std::size_t dead = 0;
    std::size_t relocated = 0;
};

/// Opacity of each half after splitting a Gaussian of opacity `o` into two
/// coincident copies: 1 - (1 - o_new)^2 = o.
double split_opacity(double o);

/// Index of a live Gaussian drawn with probability proportional to opacity.
std::size_t sample_donor(const std::vector<double>& live_opacity, Rng& rng);

/// Moves every dead Gaussian onto an opacity-sampled live donor (copying its
/// position, scale, rotation and colour), splits the pair's opacity so the
/// composited alpha at the shared centre is unchanged, resets Adam moments for
/// both, then jitters every position. The budget never changes.
RelocationStats mcmc_relocate(GaussianScene& scene, Rng& rng, const RelocationConfig& cfg,
                              AdamState* moments = nullptr);

}  // namespace smokesplat::splat
