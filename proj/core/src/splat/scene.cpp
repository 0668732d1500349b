#include "smokesplat/splat/scene.hpp"

#include "smokesplat/error.hpp"

#include <algorithm>

namespace smokesplat::splat {

void Gaussian::pack(std::span<double, kParamCount> out) const {
    for (int i = 0; i < 3; ++i) out[i] = position[i];
    for (int i = 0; i < 3; ++i) out[3 + i] = log_scale[i];
    for (int i = 0; i < 4; ++i) out[6 + i] = rotation[i];
    out[10] = opacity_logit;
    for (int i = 0; i < 3; ++i) out[11 + i] = color[i];
}

Gaussian Gaussian::unpack(std::span<const double, kParamCount> in) {
    Gaussian g;
    for (int i = 0; i < 3; ++i) g.position[i] = in[i];
    for (int i = 0; i < 3; ++i) g.log_scale[i] = in[3 + i];
    for (int i = 0; i < 4; ++i) g.rotation[i] = in[6 + i];
    g.opacity_logit = in[10];
    for (int i = 0; i < 3; ++i) g.color[i] = in[11 + i];
    return g;
}

std::vector<double> GaussianScene::flatten() const {
    std::vector<double> flat(param_count());
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        gaussians[i].pack(std::span<double, Gaussian::kParamCount>(flat.data() + i * Gaussian::kParamCount,
                                                                   Gaussian::kParamCount));
    }
    const std::size_t bg = gaussians.size() * Gaussian::kParamCount;
    for (int c = 0; c < 3; ++c) flat[bg + c] = background[c];
    return flat;
}

void GaussianScene::assign(std::span<const double> flat) {
    if (flat.size() != param_count()) throw DimensionMismatch("GaussianScene::assign: parameter count mismatch");
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        gaussians[i] = Gaussian::unpack(
            std::span<const double, Gaussian::kParamCount>(flat.data() + i * Gaussian::kParamCount,
                                                           Gaussian::kParamCount));
    }
    const std::size_t bg = gaussians.size() * Gaussian::kParamCount;
    for (int c = 0; c < 3; ++c) background[c] = flat[bg + c];
}

void GaussianScene::sanitize() {
    const double lo = std::log(kMinScale);
    const double hi = std::log(kMaxScale);
    for (auto& g : gaussians) {
        const double n = g.rotation.norm();
        g.rotation = n > 1e-12 ? Eigen::Vector4d(g.rotation / n) : Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
        for (int i = 0; i < 3; ++i) {
            g.log_scale[i] = std::clamp(g.log_scale[i], lo, hi);
            g.color[i] = std::clamp(g.color[i], 0.0, 1.0);
        }
    }
    for (int c = 0; c < 3; ++c) background[c] = std::clamp(background[c], 0.0, 1.0);
}

SceneGradients::SceneGradients(std::size_t n) : gaussians(n) {
    for (auto& g : gaussians) g.rotation.setZero();
}

std::vector<double> SceneGradients::flatten() const {
    GaussianScene tmp{gaussians, background};
    return tmp.flatten();
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q_raw) {
    const Eigen::Vector4d q = q_raw.normalized();
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Eigen::Vector3d clamped_scale(const Eigen::Vector3d& log_scale) {
    Eigen::Vector3d s;
    for (int i = 0; i < 3; ++i) s[i] = std::clamp(std::exp(log_scale[i]), kMinScale, kMaxScale);
    return s;
}

}  // namespace smokesplat::splat
