#pragma once

#include <string>

#include "uwsplat/autodiff.hpp"
#include "uwsplat/image.hpp"
#include "uwsplat/medium.hpp"

namespace uwsplat {

struct LossWeights {
  double gs = 1.0;
  double backscatter = 1.0;
  double grayworld = 1.0;
  double saturation = 1.0;
  double opacity = 1.0;
  double depth_smooth = 1.0;
  double depth_recon = 1.0;
};

struct LossConfig {
  double lambda_dssim = 0.2;
  double k_bs = 5.0;
  double t_sat = 0.7;
  double t_sim = 0.02;
  // max(D,0) + k*min(D,0) exactly as written; unbounded below, so off by default.
  bool literal_backscatter_sign = false;
  LossWeights weights;

  /// Throws std::invalid_argument unless k_bs > 1, t_sat in (0,1) and every
  /// weight is non-negative.
  void validate() const;
};

/// Mean SSIM of a differentiable (H, W, 3) image against a fixed target.
ad::Var ssim_against(const ad::Var& rendered, const RgbImage& target);

// Images are (H, W, 3) Vars, maps (H, W). Fixed inputs are plain rasters.

/// (1 - lambda) * mean|rendered - target| + lambda * (1 - ssim) / 2
ad::Var loss_gs(const ad::Var& rendered, const RgbImage& target, double lambda);

/// Sum over pixels and channels of max(D,0) + k*|min(D,0)| with D = I - b_hat.
/// Pass b_hat built from detached depth so only the medium sees a gradient.
ad::Var loss_backscatter(const RgbImage& captured, const ad::Var& b_hat, double k, bool literal_sign = false);

/// Mean over channels of (channel mean - 0.5)^2.
ad::Var loss_grayworld(const ad::Var& true_color);

/// Sum of max(J - t_sat, 0).
ad::Var loss_saturation(const ad::Var& true_color, double t_sat);

/// Sum of |z * (I - I_hat)|; z is detached here regardless of what is passed.
ad::Var loss_depth_weighted_recon(const RgbImage& captured, const ad::Var& composed, const ad::Var& depth);

/// Sum of exp(-|grad_x I|) |grad_x Z| + exp(-|grad_y I|) |grad_y Z|.
ad::Var loss_depth_smooth(const RgbImage& captured, const ad::Var& depth);

/// Sum of alpha over pixels whose squared color distance to b_inf is below t_sim.
ad::Var loss_opacity_background(const RgbImage& captured, const ad::Var& alpha, const Rgb& b_inf, double t_sim);

struct LossBreakdown {
  double gs = 0.0;
  double backscatter = 0.0;
  double grayworld = 0.0;
  double saturation = 0.0;
  double opacity = 0.0;
  double depth_smooth = 0.0;
  double depth_recon = 0.0;
  double total = 0.0;

  std::string to_string() const;
};

struct LossInputs {
  const RgbImage* captured = nullptr;  // I
  ad::Var true_color;                  // rendered J, (H, W, 3)
  ad::Var depth;                       // rendered Z, (H, W)
  ad::Var alpha;                       // (H, W)
  MediumVars medium;
  // Without the medium the prediction is J itself and only the GS term applies.
  bool medium_enabled = true;
  Uncovered uncovered = Uncovered::kOpenWater;
};

struct LossResult {
  ad::Var total;
  ad::Var composed;  // I_hat
  LossBreakdown parts;
};

/// Weighted sum of all seven terms. Terms with weight 0 are not evaluated.
LossResult total_loss(const LossInputs& in, const LossConfig& cfg);

}  // namespace uwsplat
