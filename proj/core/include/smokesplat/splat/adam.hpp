#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace smokesplat::splat {

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-15;
};

/// First and second moments, one entry per parameter.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    void reset_range(std::size_t offset, std::size_t count);
};

/// One bias-corrected Adam update with per-parameter learning rates.
/// `iteration` is 1-based.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::span<const double> learning_rates, std::uint64_t iteration, const AdamHyper& hyper = {});

}  // namespace smokesplat::splat
