#include "uwsplat/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

namespace uwsplat {

void CameraView::validate() const {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width == 0 || height == 0) throw std::invalid_argument("camera: empty image size");
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if (!rtr.isApprox(Eigen::Matrix3d::Identity(), 1e-6) || std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("camera: rotation is not a proper rotation matrix");
  }
  if (!translation.allFinite()) throw std::invalid_argument("camera: non-finite translation");
}

CameraView CameraView::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                               const Intrinsics& intrinsics, std::size_t width, std::size_t height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  // Image y points down, so the camera's y axis is the negated up vector and
  // right x down = forward.
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraView cam;
  cam.intrinsics = intrinsics;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * eye;
  cam.width = width;
  cam.height = height;
  return cam;
}

Eigen::Matrix3d quaternion_to_matrix(double w, double x, double y, double z) {
  return Eigen::Quaterniond(w, x, y, z).normalized().toRotationMatrix();
}

}  // namespace uwsplat
