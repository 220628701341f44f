#pragma once

#include <Eigen/Core>
#include <cstddef>

namespace uwsplat {

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Pinhole camera: x right, y down, looking along +z. The pose maps world
/// points into the camera frame, p_cam = rotation * p_world + translation.
/// Pixel (i, j) has its center at image coordinates (i + 0.5, j + 0.5).
struct CameraView {
  Intrinsics intrinsics;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  std::size_t width = 0;
  std::size_t height = 0;

  /// Throws std::invalid_argument on non-positive focal lengths, empty size,
  /// or a rotation that is not orthonormal with determinant +1.
  void validate() const;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * world + translation; }

  static CameraView look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                            const Intrinsics& intrinsics, std::size_t width, std::size_t height);
};

/// Unit quaternion (w, x, y, z) to rotation matrix.
Eigen::Matrix3d quaternion_to_matrix(double w, double x, double y, double z);

}  // namespace uwsplat
