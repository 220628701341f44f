#include "uwsplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "uwsplat/config.hpp"
#include "uwsplat/errors.hpp"

namespace uwsplat {

namespace fs = std::filesystem;

std::uint64_t TrainConfig::densify_stop() const {
  return densify_stop_iteration == kNever ? static_cast<std::uint64_t>(0.6 * static_cast<double>(iterations))
                                          : densify_stop_iteration;
}

void TrainConfig::validate() const {
  // Zero rates are allowed so a run can be frozen; negative or NaN rates are not.
  for (double lr : {lr_means, lr_means_final, lr_scales, lr_rotation, lr_opacity, lr_color, lr_medium})
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train config: learning rates must be >= 0");
  if (medium_update_period == 0 || densify_interval == 0 || log_interval == 0)
    throw std::invalid_argument("train config: periods must be >= 1");
  if (!(densify_grad_threshold > 0.0)) throw std::invalid_argument("train config: densify_grad_threshold must be > 0");
  if (!(prune_opacity_threshold >= 0.0 && prune_opacity_threshold < 1.0))
    throw std::invalid_argument("train config: prune_opacity_threshold must lie in [0, 1)");
  if (!(percent_dense > 0.0)) throw std::invalid_argument("train config: percent_dense must be > 0");
  if (max_gaussians == 0) throw std::invalid_argument("train config: max_gaussians must be >= 1");
  loss.validate();
}

namespace {

TrainConfig parse_config(const KeyValueFile& kv, const std::string& source) {
  TrainConfig c;
  auto count = [&](const std::string& key, std::uint64_t fallback) -> std::uint64_t {
    if (!kv.contains(key)) return fallback;
    const std::string v = kv.get_string(key);
    if (v == "inf" || v == "never") return kNever;
    const long long n = kv.get_int(key, 0);
    if (n < 0) throw DataError(source + ": '" + key + "' must be non-negative");
    return static_cast<std::uint64_t>(n);
  };
  auto rgb = [&](const std::string& key, const Rgb& fallback) -> Rgb {
    if (!kv.contains(key)) return fallback;
    const auto v = kv.get_doubles(key, 3);
    return {v[0], v[1], v[2]};
  };

  c.iterations = count("iterations", c.iterations);
  c.seed = count("seed", c.seed);
  c.lr_means = kv.get_double("lr_means", c.lr_means);
  c.lr_means_final = kv.get_double("lr_means_final", c.lr_means_final);
  c.lr_scales = kv.get_double("lr_scales", c.lr_scales);
  c.lr_rotation = kv.get_double("lr_rotation", c.lr_rotation);
  c.lr_opacity = kv.get_double("lr_opacity", c.lr_opacity);
  c.lr_color = kv.get_double("lr_color", c.lr_color);
  c.lr_medium = kv.get_double("lr_medium", c.lr_medium);
  c.medium_update_period = count("medium_update_period", c.medium_update_period);
  c.densify_interval = count("densify_interval", c.densify_interval);
  c.densify_start_iteration = count("densify_start_iteration", c.densify_start_iteration);
  c.densify_stop_iteration = count("densify_stop_iteration", c.densify_stop_iteration);
  c.densify_grad_threshold = kv.get_double("densify_grad_threshold", c.densify_grad_threshold);
  c.prune_opacity_threshold = kv.get_double("prune_opacity_threshold", c.prune_opacity_threshold);
  c.percent_dense = kv.get_double("percent_dense", c.percent_dense);
  c.max_gaussians = count("max_gaussians", c.max_gaussians);
  c.log_interval = count("log_interval", c.log_interval);
  c.eval_interval = count("eval_interval", c.eval_interval);
  c.checkpoint_interval = count("checkpoint_interval", c.checkpoint_interval);
  c.medium_enabled = kv.get_bool("medium_enabled", c.medium_enabled);
  if (const std::string u = kv.get_string("uncovered", "open_water"); u == "open_water") {
    c.uncovered = Uncovered::kOpenWater;
  } else if (u == "zero_range") {
    c.uncovered = Uncovered::kZeroRange;
  } else {
    throw DataError(source + ": uncovered must be open_water or zero_range, got '" + u + "'");
  }
  c.random_init_count = count("random_init_count", c.random_init_count);
  c.medium_init = MediumParams::from_activated(rgb("medium_init_beta_d", c.medium_init.beta_d()),
                                               rgb("medium_init_beta_b", c.medium_init.beta_b()),
                                               rgb("medium_init_b_inf", c.medium_init.b_inf()));

  LossConfig& l = c.loss;
  l.lambda_dssim = kv.get_double("lambda_dssim", l.lambda_dssim);
  l.k_bs = kv.get_double("k_bs", l.k_bs);
  l.t_sat = kv.get_double("t_sat", l.t_sat);
  l.t_sim = kv.get_double("t_sim", l.t_sim);
  l.literal_backscatter_sign = kv.get_bool("literal_backscatter_sign", l.literal_backscatter_sign);
  l.weights.gs = kv.get_double("w_gs", l.weights.gs);
  l.weights.backscatter = kv.get_double("w_bs", l.weights.backscatter);
  l.weights.grayworld = kv.get_double("w_gw", l.weights.grayworld);
  l.weights.saturation = kv.get_double("w_sat", l.weights.saturation);
  l.weights.opacity = kv.get_double("w_op", l.weights.opacity);
  l.weights.depth_smooth = kv.get_double("w_smooth", l.weights.depth_smooth);
  l.weights.depth_recon = kv.get_double("w_recon", l.weights.depth_recon);

  if (const auto extra = kv.unused_keys(); !extra.empty())
    throw DataError(source + ": unknown key '" + extra[0] + "'");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(source + ": " + e.what());
  }
  return c;
}

}  // namespace

TrainConfig TrainConfig::from_file(const fs::path& path) { return parse_config(KeyValueFile::load(path), path.string()); }

TrainConfig TrainConfig::from_text(const std::string& text) {
  return parse_config(KeyValueFile::parse(text, "<config>"), "<config>");
}

GaussianCloud init_cloud(const std::vector<SparsePoint>& points) {
  if (points.empty()) throw std::invalid_argument("init_cloud: no points");
  const std::size_t n = points.size();
  GaussianCloud cloud;
  // TODO: grid-accelerated neighbor search once SfM exports beyond ~50k points matter.
  for (std::size_t i = 0; i < n; ++i) {
    double best[3] = {INFINITY, INFINITY, INFINITY};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = (points[i].position - points[j].position).norm();
      for (int k = 0; k < 3; ++k)
        if (d < best[k]) std::swap(d, best[k]);
    }
    double sum = 0.0;
    int used = 0;
    for (double b : best)
      if (std::isfinite(b)) {
        sum += b;
        ++used;
      }
    const double dist = used ? std::max(sum / used, 1e-7) : 0.01;
    cloud.push_back(Gaussian::isotropic(points[i].position, dist, 0.1, points[i].color));
  }
  return cloud;
}

GaussianCloud init_cloud_random(std::uint64_t seed, std::size_t count, const Eigen::Vector3d& center,
                                double half_extent) {
  if (count == 0) throw std::invalid_argument("init_cloud_random: count must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> col(0.0, 1.0);
  const double sigma = half_extent / std::cbrt(static_cast<double>(count));
  GaussianCloud cloud;
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::Vector3d p = center + half_extent * Eigen::Vector3d(u(rng), u(rng), u(rng));
    cloud.push_back(Gaussian::isotropic(p, sigma, 0.1, {col(rng), col(rng), col(rng)}));
  }
  return cloud;
}

namespace {

void reset_optimizer(TrainState& s) {
  const std::size_t n = s.cloud.size();
  s.adam_means.resize(n * 3);
  s.adam_scales.resize(n * 3);
  s.adam_rotations.resize(n * 4);
  s.adam_opacity.resize(n);
  s.adam_colors.resize(n * 3);
  s.stats.resize(n);
}

}  // namespace

TrainState make_initial_state(const TrainConfig& cfg, const SceneDataset& ds) {
  cfg.validate();
  TrainState s;
  if (cfg.random_init_count > 0) {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (const Frame& f : ds.frames) center += f.camera.center();
    if (!ds.frames.empty()) center /= static_cast<double>(ds.frames.size());
    s.cloud = init_cloud_random(cfg.seed, cfg.random_init_count, center, 2.0 * scene_extent(ds));
  } else {
    if (ds.points.empty()) throw DataError("dataset has no sparse points and random_init_count is 0");
    s.cloud = init_cloud(ds.points);
  }
  s.medium = cfg.medium_init;
  reset_optimizer(s);
  s.adam_medium.resize(9);
  s.medium_grad_sum.assign(9, 0.0);
  s.rng.seed(cfg.seed);
  return s;
}

double scene_extent(const SceneDataset& ds) {
  if (ds.frames.size() < 2) return 1.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const Frame& f : ds.frames) mean += f.camera.center();
  mean /= static_cast<double>(ds.frames.size());
  double r = 0.0;
  for (const Frame& f : ds.frames) r = std::max(r, (f.camera.center() - mean).norm());
  return r > 0.0 ? 1.1 * r : 1.0;
}

namespace {

bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double means_lr(const TrainConfig& cfg, std::uint64_t it) {
  if (cfg.iterations <= 1 || cfg.lr_means == 0.0 || cfg.lr_means_final == 0.0) return cfg.lr_means;
  const double t = std::min(1.0, static_cast<double>(it) / static_cast<double>(cfg.iterations - 1));
  return std::exp((1.0 - t) * std::log(cfg.lr_means) + t * std::log(cfg.lr_means_final));
}

}  // namespace

StepResult train_step(TrainState& state, const Frame& frame, const TrainConfig& cfg) {
  const CloudParams cp = CloudParams::parameters(state.cloud);
  const ad::Var raw = ad::parameter(state.medium.raw(), {9});
  const RenderOutput out = render(cp, frame.camera, cfg.render);

  LossInputs in;
  in.captured = &frame.image;
  in.true_color = out.color;
  in.depth = out.depth;
  in.alpha = out.alpha;
  in.medium = MediumVars::from_raw(raw);
  in.medium_enabled = cfg.medium_enabled;
  in.uncovered = cfg.uncovered;
  const LossResult loss = total_loss(in, cfg.loss);
  StepResult result;
  result.loss = loss.parts;
  if (!std::isfinite(loss.parts.total))
    throw NumericError("non-finite loss at iteration " + std::to_string(state.iteration) + " (" + frame.name +
                       "): " + loss.parts.to_string());

  ad::backward(loss.total);
  const std::vector<double> g_means = cp.means.grad(), g_scales = cp.log_scales.grad(),
                            g_rot = cp.rotations.grad(), g_opac = cp.opacity_logits.grad(), g_col = cp.colors.grad();
  for (const auto* g : {&g_means, &g_scales, &g_rot, &g_opac, &g_col})
    if (!finite_all(*g))
      throw NumericError("non-finite gradient at iteration " + std::to_string(state.iteration) + " (" + frame.name +
                         "): " + loss.parts.to_string());

  GaussianCloud& c = state.cloud;
  adam_step(c.means, g_means, state.adam_means, means_lr(cfg, state.iteration));
  adam_step(c.log_scales, g_scales, state.adam_scales, cfg.lr_scales);
  adam_step(c.rotations, g_rot, state.adam_rotations, cfg.lr_rotation);
  adam_step(c.opacity_logits, g_opac, state.adam_opacity, cfg.lr_opacity);
  adam_step(c.colors, g_col, state.adam_colors, cfg.lr_color);

  // Screen gradients in half-image units, the scale the threshold is quoted in.
  const RenderTrace& tr = *out.trace;
  const double half = 0.5 * static_cast<double>(std::max(frame.camera.width, frame.camera.height));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!tr.visible[i]) continue;
    state.stats.grad_accum[i] += half * std::hypot(tr.screen_grad[2 * i], tr.screen_grad[2 * i + 1]);
    ++state.stats.count[i];
  }

  if (cfg.medium_enabled && cfg.medium_update_period != kNever) {
    const std::vector<double> g = raw.grad();
    if (!finite_all(g))
      throw NumericError("non-finite medium gradient at iteration " + std::to_string(state.iteration) + ": " +
                         loss.parts.to_string());
    for (std::size_t k = 0; k < 9; ++k) state.medium_grad_sum[k] += g[k];
    if ((state.iteration + 1) % cfg.medium_update_period == 0) {
      std::vector<double> avg(9);
      for (std::size_t k = 0; k < 9; ++k) avg[k] = state.medium_grad_sum[k] / static_cast<double>(cfg.medium_update_period);
      std::vector<double> values = state.medium.raw();
      adam_step(values, avg, state.adam_medium, cfg.lr_medium);
      state.medium = MediumParams::from_raw(values);
      state.medium_grad_sum.assign(9, 0.0);
      result.medium_stepped = true;
    }
  }
  ++state.iteration;
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

const char* kCsvHeader =
    "iteration,frame,total,gs,bs,gw,sat,op,zsmooth,zrecon,gaussians,"
    "beta_d_r,beta_d_g,beta_d_b,beta_b_r,beta_b_g,beta_b_b,b_inf_r,b_inf_g,b_inf_b,"
    "test_psnr,test_ssim,test_restored_psnr,test_depth_rmse\n";

std::size_t next_frame(TrainState& s, const SceneDataset& ds) {
  if (s.order_pos >= s.order.size()) {
    s.order = ds.train;
    std::shuffle(s.order.begin(), s.order.end(), s.rng);
    s.order_pos = 0;
  }
  return s.order[s.order_pos++];
}

}  // namespace

TrainResult run_training(TrainState state, const TrainConfig& cfg, const SceneDataset& ds,
                         const std::optional<fs::path>& out_dir, const TrainCallbacks& cb) {
  cfg.validate();
  if (ds.train.empty()) throw DataError("dataset has no training frames");
  const double extent = scene_extent(ds);
  const std::vector<std::size_t>& eval_frames = ds.test.empty() ? ds.train : ds.test;

  std::ofstream csv;
  if (out_dir) {
    fs::create_directories(*out_dir);
    const fs::path path = *out_dir / "metrics.csv";
    const bool resume = state.iteration > 0 && fs::exists(path);
    csv.open(path, resume ? std::ios::app : std::ios::trunc);
    if (!csv) throw DataError("cannot write " + path.string());
    if (!resume) csv << kCsvHeader;
  }

  auto eval_now = [&]() { return evaluate(state.cloud, state.medium, cfg.medium_enabled, cfg.uncovered, ds, eval_frames, cfg.render); };
  TrainResult result;

  while (state.iteration < cfg.iterations) {
    const std::size_t fi = next_frame(state, ds);
    const StepResult step = train_step(state, ds.frames[fi], cfg);
    const std::uint64_t it = state.iteration;  // completed iterations

    if (it >= cfg.densify_start_iteration && it < cfg.densify_stop() && it % cfg.densify_interval == 0)
      densify_and_prune(state, cfg, extent);

    const bool last = it == cfg.iterations;
    std::optional<EvalRecord> ev;
    if (last || (cfg.eval_interval > 0 && it % cfg.eval_interval == 0)) ev = eval_now();
    if (csv.is_open() && (last || ev || it % cfg.log_interval == 0)) {
      const LossBreakdown& l = step.loss;
      std::string row = std::to_string(it) + "," + ds.frames[fi].name;
      for (double v : {l.total, l.gs, l.backscatter, l.grayworld, l.saturation, l.opacity, l.depth_smooth, l.depth_recon})
        row += "," + fmt(v);
      row += "," + std::to_string(state.cloud.size());
      for (const Rgb& v : {state.medium.beta_d(), state.medium.beta_b(), state.medium.b_inf()})
        for (double x : v) row += "," + fmt(x);
      if (ev) {
        row += "," + fmt(ev->mean_psnr) + "," + fmt(ev->mean_ssim) + "," + fmt(ev->mean_restored_psnr) + "," +
               fmt(ev->mean_depth_rmse);
      } else {
        row += ",,,,";
      }
      csv << row << "\n";
    }
    if (cb.log && (it % 100 == 0 || last)) cb.log("iter " + std::to_string(it) + " n=" + std::to_string(state.cloud.size()) + " " + step.loss.to_string());
    if (out_dir && cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 && !last)
      save_checkpoint(state, *out_dir / "checkpoints" / ("iter_" + std::to_string(it)));
    if (last) result.final_eval = ev;
  }
  if (!result.final_eval) result.final_eval = eval_now();

  if (out_dir) {
    csv.flush();
    save_checkpoint(state, *out_dir / "final");
    save_medium(state.medium, *out_dir / "medium.txt");
  }
  result.state = std::move(state);
  return result;
}

}  // namespace uwsplat
