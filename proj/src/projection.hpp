#pragma once

#include <Eigen/Core>
#include <cmath>

#include "uwsplat/camera.hpp"
#include "uwsplat/render.hpp"

namespace uwsplat::detail {

template <class T>
struct ScreenSplat {
  T mean_x, mean_y;
  T cov_a, cov_b, cov_c;  // [[a, b], [b, c]]
  T conic_a, conic_b, conic_c;
  T depth;
};

inline double scalar_value(double v) { return v; }
template <class T>
double scalar_value(const T& v) {
  return v.value();
}

// Projects one Gaussian given its raw parameters; generic over the scalar so
// the same code yields values (double) and Jacobians (forward-mode duals).
// Returns false when the center is behind the near plane.
template <class T>
bool project_splat(const T* mean, const T* log_scale, const T* quat, const CameraView& cam, const RenderOptions& opts,
                   ScreenSplat<T>& out) {
  using std::exp;
  using std::sqrt;
  using Mat3 = Eigen::Matrix<T, 3, 3>;
  using Vec3 = Eigen::Matrix<T, 3, 1>;

  const Mat3 w = cam.rotation.template cast<T>();
  const Vec3 m(mean[0], mean[1], mean[2]);
  const Vec3 pc = w * m + cam.translation.template cast<T>();
  if (!(scalar_value(pc[2]) > opts.near_plane)) return false;

  const T qn = sqrt(quat[0] * quat[0] + quat[1] * quat[1] + quat[2] * quat[2] + quat[3] * quat[3]);
  const T qw = quat[0] / qn;
  const T qx = quat[1] / qn;
  const T qy = quat[2] / qn;
  const T qz = quat[3] / qn;
  Mat3 r;
  r(0, 0) = T(1.0) - T(2.0) * (qy * qy + qz * qz);
  r(0, 1) = T(2.0) * (qx * qy - qw * qz);
  r(0, 2) = T(2.0) * (qx * qz + qw * qy);
  r(1, 0) = T(2.0) * (qx * qy + qw * qz);
  r(1, 1) = T(1.0) - T(2.0) * (qx * qx + qz * qz);
  r(1, 2) = T(2.0) * (qy * qz - qw * qx);
  r(2, 0) = T(2.0) * (qx * qz - qw * qy);
  r(2, 1) = T(2.0) * (qy * qz + qw * qx);
  r(2, 2) = T(1.0) - T(2.0) * (qx * qx + qy * qy);

  Mat3 rs;
  for (int c = 0; c < 3; ++c) {
    const T s = exp(log_scale[c]);
    for (int row = 0; row < 3; ++row) rs(row, c) = r(row, c) * s;
  }
  const Mat3 cov_cam = w * (rs * rs.transpose()) * w.transpose();

  const double fx = cam.intrinsics.fx;
  const double fy = cam.intrinsics.fy;
  const T inv_z = T(1.0) / pc[2];
  const T inv_z2 = inv_z * inv_z;
  Eigen::Matrix<T, 2, 3> j;
  j(0, 0) = fx * inv_z;
  j(0, 1) = T(0.0);
  j(0, 2) = -fx * pc[0] * inv_z2;
  j(1, 0) = T(0.0);
  j(1, 1) = fy * inv_z;
  j(1, 2) = -fy * pc[1] * inv_z2;
  const Eigen::Matrix<T, 2, 2> cov2 = j * cov_cam * j.transpose();

  out.mean_x = fx * pc[0] * inv_z + cam.intrinsics.cx;
  out.mean_y = fy * pc[1] * inv_z + cam.intrinsics.cy;
  out.cov_a = cov2(0, 0) + opts.dilation;
  out.cov_b = T(0.5) * (cov2(0, 1) + cov2(1, 0));
  out.cov_c = cov2(1, 1) + opts.dilation;
  const T det = out.cov_a * out.cov_c - out.cov_b * out.cov_b;
  out.conic_a = out.cov_c / det;
  out.conic_b = -out.cov_b / det;
  out.conic_c = out.cov_a / det;
  out.depth = pc[2];
  return true;
}

}  // namespace uwsplat::detail
