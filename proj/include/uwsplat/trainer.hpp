#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uwsplat/dataset.hpp"
#include "uwsplat/gaussians.hpp"
#include "uwsplat/losses.hpp"
#include "uwsplat/medium.hpp"
#include "uwsplat/optimizer.hpp"
#include "uwsplat/render.hpp"

namespace uwsplat {

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct TrainConfig {
  std::uint64_t iterations = 3000;
  std::uint64_t seed = 0;

  double lr_means = 1.6e-4;
  double lr_means_final = 1.6e-6;  // exponential decay target at the last iteration
  double lr_scales = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_medium = 1e-3;
  std::uint64_t medium_update_period = 10;  // kNever freezes the medium

  std::uint64_t densify_interval = 100;
  std::uint64_t densify_start_iteration = 100;
  std::uint64_t densify_stop_iteration = kNever;  // kNever: 60% of iterations
  double densify_grad_threshold = 2e-4;
  double prune_opacity_threshold = 0.005;
  double percent_dense = 0.01;  // clone/split boundary as a fraction of the scene extent
  std::size_t max_gaussians = 20000;

  std::uint64_t log_interval = 10;
  std::uint64_t eval_interval = 0;        // 0: only after the last iteration
  std::uint64_t checkpoint_interval = 0;  // 0: only the final checkpoint

  bool medium_enabled = true;  // false: A = 1, B = 0, GS term only
  Uncovered uncovered = Uncovered::kOpenWater;  // key "uncovered": open_water | zero_range
  std::size_t random_init_count = 0;  // > 0 ignores the sparse points
  MediumParams medium_init = MediumParams::initial();

  LossConfig loss;
  RenderOptions render;

  std::uint64_t densify_stop() const;
  /// Throws std::invalid_argument on non-positive rates or zero periods.
  void validate() const;
  /// Keys as the field names; loss keys are lambda_dssim, k_bs, t_sat, t_sim,
  /// literal_backscatter_sign and w_gs, w_bs, w_gw, w_sat, w_op, w_smooth,
  /// w_recon; the medium start is medium_init_beta_d/_beta_b/_b_inf.
  /// Unknown keys raise DataError.
  static TrainConfig from_file(const std::filesystem::path& path);
  static TrainConfig from_text(const std::string& text);
};

struct DensifyStats {
  std::vector<double> grad_accum;     // summed screen-space gradient norms
  std::vector<std::uint32_t> count;   // renders in which the splat was visible

  void resize(std::size_t n) {
    grad_accum.assign(n, 0.0);
    count.assign(n, 0);
  }
  bool operator==(const DensifyStats&) const = default;
};

struct TrainState {
  GaussianCloud cloud;
  MediumParams medium;
  AdamState adam_means, adam_scales, adam_rotations, adam_opacity, adam_colors, adam_medium;
  std::vector<double> medium_grad_sum;  // accumulated between medium steps
  DensifyStats stats;
  std::uint64_t iteration = 0;
  std::vector<std::size_t> order;  // current pass over the training frames
  std::size_t order_pos = 0;
  std::mt19937_64 rng;
};

/// One splat per point at its position and color; isotropic scale from the
/// mean distance to the 3 nearest neighbors, identity rotation, opacity 0.1.
/// Throws std::invalid_argument when points is empty.
GaussianCloud init_cloud(const std::vector<SparsePoint>& points);
/// count random splats uniformly inside the box center +- half_extent.
GaussianCloud init_cloud_random(std::uint64_t seed, std::size_t count, const Eigen::Vector3d& center,
                                double half_extent);

TrainState make_initial_state(const TrainConfig& cfg, const SceneDataset& ds);

struct StepResult {
  LossBreakdown loss;
  bool medium_stepped = false;
};

/// Renders, composes, evaluates the total loss, backpropagates and applies
/// the optimizer. Throws NumericError with the loss breakdown when the loss
/// or a gradient is not finite.
StepResult train_step(TrainState& state, const Frame& frame, const TrainConfig& cfg);

/// Clones or splits splats whose mean screen gradient exceeds the threshold
/// and drops those below the opacity threshold. Throws NumericError when
/// nothing would remain.
void densify_and_prune(TrainState& state, const TrainConfig& cfg, double scene_extent);

/// Radius of the camera centers around their mean, times 1.1; 1 for a
/// single view.
double scene_extent(const SceneDataset& ds);

struct FrameMetrics {
  std::string name;
  double psnr = 0.0;  // composed prediction vs captured image
  double ssim = 0.0;
  std::optional<double> restored_psnr;  // rendered true color vs ground truth
  std::optional<double> depth_rmse;     // over pixels with alpha > 0.5
};

struct EvalRecord {
  std::vector<FrameMetrics> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  std::optional<double> mean_restored_psnr;
  std::optional<double> mean_depth_rmse;
  // |activated estimate - truth| per channel, when the truth is known
  std::optional<Rgb> beta_d_error, beta_b_error, b_inf_error;
};

struct RenderedView {
  RgbImage true_color;  // J hat
  RgbImage composed;    // I hat
  ScalarMap depth;
  ScalarMap alpha;
};

RenderedView render_view(const GaussianCloud& cloud, const MediumParams& medium, bool medium_enabled,
                         Uncovered uncovered, const CameraView& cam, const RenderOptions& opts = {});

EvalRecord evaluate(const GaussianCloud& cloud, const MediumParams& medium, bool medium_enabled,
                    Uncovered uncovered, const SceneDataset& ds, const std::vector<std::size_t>& frames, const RenderOptions& opts = {});

// Checkpoint directory: cloud.bin, medium.txt, state.bin (optimizer moments,
// densification statistics, frame order, iteration, generator state).
void save_checkpoint(const TrainState& state, const std::filesystem::path& dir);
TrainState load_checkpoint(const std::filesystem::path& dir);

struct TrainCallbacks {
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  TrainState state;
  std::optional<EvalRecord> final_eval;
};

/// Runs from `state` up to cfg.iterations. When out_dir is set, writes
/// metrics.csv, checkpoints under checkpoints/iter_<n>/ and final/, and the
/// final medium.txt.
TrainResult run_training(TrainState state, const TrainConfig& cfg, const SceneDataset& ds,
                         const std::optional<std::filesystem::path>& out_dir, const TrainCallbacks& cb = {});

}  // namespace uwsplat
