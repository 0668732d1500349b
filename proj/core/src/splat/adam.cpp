#include "smokesplat/splat/adam.hpp"

#include "smokesplat/error.hpp"

#include <algorithm>
#include <cmath>

namespace smokesplat::splat {

void AdamState::reset_range(std::size_t offset, std::size_t count) {
    std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(offset), count, 0.0);
    std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(offset), count, 0.0);
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::span<const double> learning_rates, std::uint64_t iteration, const AdamHyper& hyper) {
    const std::size_t n = params.size();
    if (grads.size() != n || state.m.size() != n || state.v.size() != n || learning_rates.size() != n) {
        throw DimensionMismatch("adam_step: parameter, gradient, state and learning-rate sizes differ");
    }
    if (iteration == 0) throw InvalidArgument("adam_step: iteration is 1-based");
    const double t = static_cast<double>(iteration);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= learning_rates[i] * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
}

}  // namespace smokesplat::splat
