#include "smokesplat/splat/mcmc.hpp"

#include <cmath>

namespace smokesplat::splat {

double split_opacity(double o) { return 1.0 - std::sqrt(1.0 - o); }

std::size_t sample_donor(const std::vector<double>& live_opacity, Rng& rng) {
    return rng.categorical(live_opacity);
}

RelocationStats mcmc_relocate(GaussianScene& scene, Rng& rng, const RelocationConfig& cfg, AdamState* moments) {
    RelocationStats stats;
    auto& gs = scene.gaussians;

    std::vector<std::size_t> dead;
    std::vector<std::size_t> live;
    std::vector<double> live_opacity;
    for (std::size_t i = 0; i < gs.size(); ++i) {
        const double o = gs[i].opacity();
        if (o < cfg.dead_opacity) {
            dead.push_back(i);
        } else {
            live.push_back(i);
            live_opacity.push_back(o);
        }
    }
    stats.dead = dead.size();

    if (!live.empty()) {
        constexpr std::size_t kStride = Gaussian::kParamCount;
        for (const std::size_t d : dead) {
            const std::size_t donor = live[sample_donor(live_opacity, rng)];
            // The donor may already have been split this round; its current
            // opacity keeps the total composited alpha intact.
            const double o_new = split_opacity(gs[donor].opacity());
            Gaussian moved = gs[donor];
            moved.opacity_logit = logit(o_new);
            gs[donor].opacity_logit = moved.opacity_logit;
            gs[d] = moved;
            if (moments != nullptr) {
                moments->reset_range(d * kStride, kStride);
                moments->reset_range(donor * kStride, kStride);
            }
            ++stats.relocated;
        }
    }

    if (cfg.noise_scale > 0.0) {
        for (auto& g : gs) {
            const double sigma = cfg.noise_scale * (1.0 - g.opacity()) * std::exp(g.log_scale.mean());
            for (int k = 0; k < 3; ++k) g.position[k] += sigma * rng.normal();
        }
    }
    return stats;
}

}  // namespace smokesplat::splat
