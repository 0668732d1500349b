#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace smokesplat::splat {

inline constexpr double kMinScale = 1e-4;
inline constexpr double kMaxScale = 1e2;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// One anisotropic 3-D Gaussian with degree-0 colour.
struct Gaussian {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    /// Log of the per-axis standard deviation.
    Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
    /// Quaternion (w, x, y, z); normalized on use.
    Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};
    double opacity_logit = 0.0;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();

    double opacity() const { return sigmoid(opacity_logit); }

    static constexpr int kParamCount = 14;
    void pack(std::span<double, kParamCount> out) const;
    static Gaussian unpack(std::span<const double, kParamCount> in);

    friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

/// Fixed-budget set of Gaussians plus a background colour.
struct GaussianScene {
    std::vector<Gaussian> gaussians;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();

    std::size_t budget() const noexcept { return gaussians.size(); }
    std::size_t param_count() const noexcept { return gaussians.size() * Gaussian::kParamCount + 3; }

    /// Gaussians in index order, then the background.
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    /// Renormalizes quaternions, clamps log-scales and colours into range.
    void sanitize();

    friend bool operator==(const GaussianScene&, const GaussianScene&) = default;
};

/// Gradient of a scalar with respect to every scene parameter. Reuses the
/// Gaussian layout so each field holds d loss / d field.
struct SceneGradients {
    std::vector<Gaussian> gaussians;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();

    explicit SceneGradients(std::size_t n = 0);
    std::vector<double> flatten() const;
};

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Eigen::Matrix3d rotation_matrix(const Eigen::Vector4d& q);

/// Per-axis standard deviation with the [kMinScale, kMaxScale] clamp.
Eigen::Vector3d clamped_scale(const Eigen::Vector3d& log_scale);

}  // namespace smokesplat::splat
