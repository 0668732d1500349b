#include "smokesplat/splat/loss.hpp"

#include "smokesplat/error.hpp"
#include "smokesplat/eval.hpp"

#include <cmath>

namespace smokesplat::splat {

double loss(const Image& rendered, const Image& target, double lambda) {
    require_same_shape(rendered, target, "loss");
    const auto a = rendered.data();
    const auto b = target.data();
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
    l1 /= static_cast<double>(a.size());
    double value = (1.0 - lambda) * l1;
    if (lambda != 0.0) value += lambda * (1.0 - eval::ssim(rendered, target));
    return value;
}

LossGradient loss_with_gradient(const Image& rendered, const Image& target, double lambda) {
    require_same_shape(rendered, target, "loss");
    const auto a = rendered.data();
    const auto b = target.data();
    const double n = static_cast<double>(a.size());
    LossGradient out;
    out.d_rendered.resize(a.size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        l1 += std::abs(d);
        out.d_rendered[i] = (1.0 - lambda) * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.value = (1.0 - lambda) * l1 / n;
    if (lambda != 0.0) {
        const auto sg = eval::ssim_with_gradient(luminance(rendered), luminance(target));
        out.value += lambda * (1.0 - sg.value);
        for (std::size_t p = 0; p < sg.d_first.values.size(); ++p) {
            const double g = -lambda * sg.d_first.values[p];
            out.d_rendered[3 * p] += g * kLumaR;
            out.d_rendered[3 * p + 1] += g * kLumaG;
            out.d_rendered[3 * p + 2] += g * kLumaB;
        }
    }
    return out;
}

}  // namespace smokesplat::splat
