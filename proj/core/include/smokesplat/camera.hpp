#pragma once

#include <Eigen/Core>

namespace smokesplat {

/// Pinhole camera with a world-to-camera rigid pose.
///
/// Camera frame: +x right, +y down, +z forward. A world point p maps to
/// p_cam = rotation * p + translation and to pixel (fx x/z + cx, fy y/z + cy),
/// where pixel (i, j) covers [i, i+1) x [j, j+1) and has its center at
/// (i + 0.5, j + 0.5).
struct CameraView {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    int width = 1;
    int height = 1;

    /// Throws InvalidArgument when the intrinsics or rotation are invalid.
    void validate() const;

    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
    Eigen::Vector3d forward() const { return rotation.row(2).transpose(); }

    /// Camera at `eye` looking at `target`, with `up` as the world up hint.
    static CameraView look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                              const Eigen::Vector3d& up, double focal, int width, int height);
};

}  // namespace smokesplat
