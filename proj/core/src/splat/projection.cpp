#include "smokesplat/splat/projection.hpp"

#include <cmath>

namespace smokesplat::splat {
namespace {

using Matrix23d = Eigen::Matrix<double, 2, 3>;

Matrix23d perspective_jacobian(const Eigen::Vector3d& p, const CameraView& cam) {
    const double iz = 1.0 / p.z();
    Matrix23d j;
    j << cam.fx * iz, 0.0, -cam.fx * p.x() * iz * iz,
        0.0, cam.fy * iz, -cam.fy * p.y() * iz * iz;
    return j;
}

// dL/dq for R(q / |q|), given dL/dR.
Eigen::Vector4d quaternion_backward(const Eigen::Vector4d& q_raw, const Eigen::Matrix3d& dr) {
    const double norm = q_raw.norm();
    const Eigen::Vector4d q = q_raw / norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d dq;
    dq[0] = 2.0 * (-z * dr(0, 1) + y * dr(0, 2) + z * dr(1, 0) - x * dr(1, 2) - y * dr(2, 0) + x * dr(2, 1));
    dq[1] = 2.0 * (y * dr(0, 1) + z * dr(0, 2) + y * dr(1, 0) - 2.0 * x * dr(1, 1) - w * dr(1, 2) + z * dr(2, 0) +
                   w * dr(2, 1) - 2.0 * x * dr(2, 2));
    dq[2] = 2.0 * (-2.0 * y * dr(0, 0) + x * dr(0, 1) + w * dr(0, 2) + x * dr(1, 0) + z * dr(1, 2) - w * dr(2, 0) +
                   z * dr(2, 1) - 2.0 * y * dr(2, 2));
    dq[3] = 2.0 * (-2.0 * z * dr(0, 0) - w * dr(0, 1) + x * dr(0, 2) + w * dr(1, 0) - 2.0 * z * dr(1, 1) +
                   y * dr(1, 2) + x * dr(2, 0) + y * dr(2, 1));
    // Through the normalization q / |q|.
    return (dq - q * q.dot(dq)) / norm;
}

}  // namespace

Splat2D project_gaussian(const Gaussian& g, const CameraView& cam, const RenderSettings& settings) {
    Splat2D out;
    const Eigen::Vector3d p = cam.rotation * g.position + cam.translation;
    out.depth = p.z();
    if (p.z() <= settings.z_near) return out;
    out.culled = false;
    out.mean2d = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};

    const Eigen::Matrix3d rq = rotation_matrix(g.rotation);
    const Eigen::Vector3d s = clamped_scale(g.log_scale);
    const Eigen::Matrix3d m = rq * s.asDiagonal();
    const Eigen::Matrix3d sigma = m * m.transpose();
    const Matrix23d t = perspective_jacobian(p, cam) * cam.rotation;
    out.cov2d = t * sigma * t.transpose();
    out.cov2d(0, 0) += settings.cov_floor;
    out.cov2d(1, 1) += settings.cov_floor;
    return out;
}

Gaussian project_gaussian_backward(const Gaussian& g, const CameraView& cam, const Eigen::Vector2d& d_mean2d,
                                   const Eigen::Matrix2d& d_cov2d) {
    Gaussian grad;
    grad.rotation.setZero();
    const Eigen::Vector3d p = cam.rotation * g.position + cam.translation;
    const double x = p.x(), y = p.y(), z = p.z();
    const double iz = 1.0 / z;
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;

    Eigen::Vector3d d_pcam;
    d_pcam.x() = d_mean2d.x() * cam.fx * iz;
    d_pcam.y() = d_mean2d.y() * cam.fy * iz;
    d_pcam.z() = -d_mean2d.x() * cam.fx * x * iz2 - d_mean2d.y() * cam.fy * y * iz2;

    const Eigen::Matrix3d rq = rotation_matrix(g.rotation);
    const Eigen::Vector3d s = clamped_scale(g.log_scale);
    const Eigen::Matrix3d m = rq * s.asDiagonal();
    const Eigen::Matrix3d sigma = m * m.transpose();
    const Matrix23d j = perspective_jacobian(p, cam);
    const Matrix23d t = j * cam.rotation;

    const Eigen::Matrix2d g2 = 0.5 * (d_cov2d + d_cov2d.transpose());
    const Eigen::Matrix3d d_sigma = t.transpose() * g2 * t;
    const Matrix23d d_t = 2.0 * g2 * t * sigma;
    const Matrix23d d_j = d_t * cam.rotation.transpose();

    d_pcam.x() += -cam.fx * iz2 * d_j(0, 2);
    d_pcam.y() += -cam.fy * iz2 * d_j(1, 2);
    d_pcam.z() += -cam.fx * iz2 * d_j(0, 0) + 2.0 * cam.fx * x * iz3 * d_j(0, 2) - cam.fy * iz2 * d_j(1, 1) +
                  2.0 * cam.fy * y * iz3 * d_j(1, 2);
    grad.position = cam.rotation.transpose() * d_pcam;

    // Sigma = M M^T with M = R_q diag(s).
    const Eigen::Matrix3d d_m = 2.0 * d_sigma * m;
    Eigen::Matrix3d d_rq;
    for (int i = 0; i < 3; ++i) {
        const double d_s = rq.col(i).dot(d_m.col(i));
        const double unclamped = std::exp(g.log_scale[i]);
        grad.log_scale[i] = (unclamped > kMinScale && unclamped < kMaxScale) ? d_s * s[i] : 0.0;
        d_rq.col(i) = d_m.col(i) * s[i];
    }
    grad.rotation = quaternion_backward(g.rotation, d_rq);
    return grad;
}

}  // namespace smokesplat::splat
