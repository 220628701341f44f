#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "uwsplat/autodiff.hpp"
#include "uwsplat/image.hpp"

namespace uwsplat {

using Rgb = std::array<double, 3>;

double softplus(double x);
double inverse_softplus(double y);
double sigmoid(double x);
double logit(double p);

enum class MediumPreset { kNone, kWater, kFog };

/// Global medium unknowns in unconstrained form: attenuation and backscatter
/// rates pass through softplus (1/m), the veiling color through a sigmoid.
struct MediumParams {
  Rgb beta_d_raw{};
  Rgb beta_b_raw{};
  Rgb b_inf_raw{};

  Rgb beta_d() const;
  Rgb beta_b() const;
  Rgb b_inf() const;

  /// Activated values are clamped into the representable range first
  /// (rates >= 1e-12, veiling color in [1e-9, 1 - 1e-9]).
  static MediumParams from_activated(const Rgb& beta_d, const Rgb& beta_b, const Rgb& b_inf);
  /// beta_d = beta_b = (1, 1, 1), b_inf = (0.2, 0.3, 0.4).
  static MediumParams initial();
  static MediumParams preset(MediumPreset p);

  /// Raw values as [beta_d(3), beta_b(3), b_inf(3)].
  std::vector<double> raw() const;
  static MediumParams from_raw(std::span<const double> raw9);

  bool operator==(const MediumParams&) const = default;
};

/// Differentiable activated medium coefficients, each of shape (3).
struct MediumVars {
  ad::Var beta_d;
  ad::Var beta_b;
  ad::Var b_inf;

  /// Activates a (9) raw parameter vector laid out as MediumParams::raw().
  static MediumVars from_raw(const ad::Var& raw9);
  static MediumVars constants(const MediumParams& p);
};

// Graph versions; depth is (H, W), images (H, W, 3).
/// exp(-beta_d[c] * z)
ad::Var attenuation(const MediumVars& m, const ad::Var& depth);
/// b_inf[c] * (1 - exp(-beta_b[c] * z))
ad::Var backscatter(const MediumVars& m, const ad::Var& depth);
/// j * attenuation + backscatter
ad::Var compose(const ad::Var& true_color, const ad::Var& depth, const MediumVars& m);

// A rendered pixel is only partly covered by splats. With kOpenWater the
// uncovered fraction (1 - alpha) looks into water of unbounded range and
// contributes b_inf; with kZeroRange it contributes nothing, as if depth 0.
enum class Uncovered { kZeroRange, kOpenWater };

/// b_inf[c] * (1 - coverage * exp(-beta_b[c] * z)); coverage is (H, W).
ad::Var backscatter(const MediumVars& m, const ad::Var& depth, const ad::Var& coverage);
/// Coverage-aware compose. For kZeroRange coverage is ignored.
ad::Var compose(const ad::Var& true_color, const ad::Var& depth, const ad::Var& coverage, const MediumVars& m,
                Uncovered uncovered);

// Raster versions. Negative depth throws std::invalid_argument.
RgbImage attenuation_map(const MediumParams& p, const ScalarMap& depth);
RgbImage backscatter_image(const MediumParams& p, const ScalarMap& depth);
RgbImage compose(const RgbImage& true_color, const ScalarMap& depth, const MediumParams& p);

inline constexpr double kAttenuationFloor = 1e-6;

struct RestoreOptions {
  bool clamp_for_display = false;  // clamp the result to [0, 2]
};

/// Inverts the formation model: (I - B) / max(A, 1e-6).
RgbImage restore(const RgbImage& captured, const ScalarMap& depth, const MediumParams& p, RestoreOptions opts = {});

/// Text file of activated coefficients ("beta_d = r g b", "beta_b = ...",
/// "b_inf = ...") plus a "raw = ..." line that reloads bit-exactly.
void save_medium(const MediumParams& p, const std::filesystem::path& path);
MediumParams load_medium(const std::filesystem::path& path);

}  // namespace uwsplat
