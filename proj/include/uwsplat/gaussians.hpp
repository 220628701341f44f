#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace uwsplat {

double opacity_from_logit(double logit);
double logit_from_opacity(double opacity);

/// One splat in unconstrained parameters. Color is view-independent linear RGB
/// used as-is; opacity goes through a sigmoid, scale through exp, and the
/// rotation quaternion (w, x, y, z) is normalized at use.
struct Gaussian {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d log_scale = Eigen::Vector3d::Zero();
  Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};
  double opacity_logit = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  double opacity() const { return opacity_from_logit(opacity_logit); }
  Eigen::Vector3d scale() const { return log_scale.array().exp(); }
  /// R diag(s^2) R^T
  Eigen::Matrix3d covariance() const;

  static Gaussian isotropic(const Eigen::Vector3d& mean, double sigma, double opacity, const Eigen::Vector3d& color);
};

/// Parameter buffers for a set of Gaussians, flat and row-major per splat.
struct GaussianCloud {
  std::vector<double> means;           // N x 3
  std::vector<double> log_scales;      // N x 3
  std::vector<double> rotations;       // N x 4
  std::vector<double> opacity_logits;  // N
  std::vector<double> colors;          // N x 3

  std::size_t size() const { return opacity_logits.size(); }
  bool empty() const { return opacity_logits.empty(); }

  void push_back(const Gaussian& g);
  Gaussian get(std::size_t i) const;
  void set(std::size_t i, const Gaussian& g);
  /// Keeps the splats with keep[i] == true, preserving order.
  void filter(const std::vector<bool>& keep);

  /// Throws std::invalid_argument if the buffers disagree in length.
  void validate() const;

  bool operator==(const GaussianCloud&) const = default;
};

// Binary layout, little-endian: "UWGS", u32 version (1), u32 values per
// splat (14), u64 count, then per splat f64 mean[3], log_scale[3],
// quaternion[4], opacity_logit, rgb[3].
void save_cloud(const GaussianCloud& cloud, const std::filesystem::path& path);
GaussianCloud load_cloud(const std::filesystem::path& path);

/// ASCII PLY point cloud (position + 8-bit color) for external viewers.
void export_point_cloud_ply(const GaussianCloud& cloud, const std::filesystem::path& path);

}  // namespace uwsplat
