#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "uwsplat/autodiff.hpp"
#include "uwsplat/camera.hpp"
#include "uwsplat/gaussians.hpp"
#include "uwsplat/image.hpp"

namespace uwsplat {

struct RenderOptions {
  double near_plane = 0.01;
  double dilation = 0.3;            // added to the diagonal of the screen covariance
  double alpha_max = 0.99;
  double min_transmittance = 1e-4;  // compositing stops once T falls below this
  double depth_alpha_floor = 1e-6;  // pixels with less accumulated alpha read depth 0
  double cutoff_sigma = 6.0;        // screen-space footprint radius in standard deviations
  double min_power = -20.0;         // skip a splat at a pixel once its falloff is below exp(min_power)
  std::size_t tile_size = 8;
};

struct ProjectedGaussian {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;  // includes the dilation
  double depth = 0.0;   // camera-frame z
};

/// EWA projection of one Gaussian; nullopt when its center is not in front of
/// the near plane.
std::optional<ProjectedGaussian> project(const Gaussian& g, const CameraView& cam, const RenderOptions& opts = {});

/// Differentiable handles on a cloud's parameter buffers.
struct CloudParams {
  ad::Var means;           // (N, 3)
  ad::Var log_scales;      // (N, 3)
  ad::Var rotations;       // (N, 4)
  ad::Var opacity_logits;  // (N)
  ad::Var colors;          // (N, 3)

  std::size_t size() const { return opacity_logits.size(); }

  static CloudParams constants(const GaussianCloud& cloud);
  static CloudParams parameters(const GaussianCloud& cloud);
};

/// Side information of one render, filled in by backward().
struct RenderTrace {
  std::size_t gaussian_count = 0;
  std::vector<bool> visible;           // center in front of the camera
  std::vector<double> screen_grad;     // N x 2, d loss / d projected mean
};

struct RenderOutput {
  ad::Var color;  // (H, W, 3)
  ad::Var depth;  // (H, W), alpha-normalized camera depth
  ad::Var alpha;  // (H, W), accumulated opacity
  std::shared_ptr<RenderTrace> trace;
};

/// Tile-based front-to-back rasterization. Color, depth and alpha are
/// differentiable with respect to every parameter in `cloud`.
RenderOutput render(const CloudParams& cloud, const CameraView& cam, const RenderOptions& opts = {});

/// Plain buffers of a render, row-major.
struct RasterImages {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> color;  // H x W x 3
  std::vector<double> depth;  // H x W
  std::vector<double> alpha;  // H x W

  RgbImage color_image() const;
  ScalarMap depth_map() const;
  ScalarMap alpha_map() const;
};

RasterImages render_images(const GaussianCloud& cloud, const CameraView& cam, const RenderOptions& opts = {});

/// Reference rasterizer: every pixel visits every projected Gaussian in depth
/// order with no footprint culling and no early termination.
RasterImages render_bruteforce(const GaussianCloud& cloud, const CameraView& cam, const RenderOptions& opts = {});

}  // namespace uwsplat
