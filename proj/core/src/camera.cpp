#include "smokesplat/camera.hpp"

#include "smokesplat/error.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>

namespace smokesplat {

void CameraView::validate() const {
    if (width <= 0 || height <= 0) throw InvalidArgument("camera raster size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw InvalidArgument("camera principal point outside the raster");
    }
    if (!rotation.allFinite() || !translation.allFinite()) throw InvalidArgument("camera pose is not finite");
    const double ortho = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6) {
        throw InvalidArgument("camera rotation is not a proper orthonormal matrix");
    }
}

CameraView CameraView::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                               const Eigen::Vector3d& up, double focal, int width, int height) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(up);
    if (right.norm() < 1e-9) throw InvalidArgument("look_at: view direction parallel to up vector");
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);

    CameraView cam;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    cam.width = width;
    cam.height = height;
    return cam;
}

}  // namespace smokesplat
