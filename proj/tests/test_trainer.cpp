#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "doctest.h"
#include "uwsplat/dataset.hpp"
#include "uwsplat/errors.hpp"
#include "uwsplat/raster_vars.hpp"
#include "uwsplat/render.hpp"
#include "uwsplat/trainer.hpp"

using namespace uwsplat;
namespace fs = std::filesystem;

namespace {

SceneDataset small_scene(std::uint64_t seed, bool water) {
  SyntheticSpec s;
  s.width = s.height = 16;
  s.views = 9;
  s.supersample = 1;
  s.points_per_view = 20;
  SceneDataset ds = generate_synthetic_scene(seed, s);
  if (water) apply_medium(ds, MediumParams::preset(MediumPreset::kWater));
  return ds;
}

TrainConfig quick_config(std::uint64_t iterations) {
  TrainConfig c;
  c.iterations = iterations;
  c.densify_interval = 5;
  c.densify_start_iteration = 5;
  c.log_interval = 1000;
  c.medium_update_period = 2;
  c.lr_medium = 1e-2;
  c.loss.weights.backscatter = c.loss.weights.saturation = c.loss.weights.opacity = 1.0 / 256;
  c.loss.weights.depth_smooth = c.loss.weights.depth_recon = 1.0 / 256;
  return c;
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("uwsplat_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_state(const TrainState& a, const TrainState& b) {
  return a.cloud == b.cloud && a.medium.beta_d_raw == b.medium.beta_d_raw && a.medium.beta_b_raw == b.medium.beta_b_raw &&
         a.medium.b_inf_raw == b.medium.b_inf_raw && a.iteration == b.iteration && a.stats == b.stats &&
         a.adam_means.m == b.adam_means.m && a.adam_medium.v == b.adam_medium.v;
}

}  // namespace

TEST_CASE("config text parses known keys and rejects the rest") {
  const TrainConfig c = TrainConfig::from_text(
      "iterations = 12\nmedium_update_period = never\nuncovered = zero_range\nw_gw = 0.5\n"
      "medium_init_b_inf = 0.1 0.2 0.3\n# comment\nlr_means = 0\n");
  CHECK(c.iterations == 12);
  CHECK(c.medium_update_period == kNever);
  CHECK(c.uncovered == Uncovered::kZeroRange);
  CHECK(c.loss.weights.grayworld == 0.5);
  CHECK(c.medium_init.b_inf()[2] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(TrainConfig::from_text("").uncovered == Uncovered::kOpenWater);

  CHECK_THROWS_AS(TrainConfig::from_text("iteratoins = 3\n"), DataError);
  CHECK_THROWS_AS(TrainConfig::from_text("uncovered = sometimes\n"), DataError);
  CHECK_THROWS_AS(TrainConfig::from_text("lr_color = -1\n"), DataError);
  CHECK_THROWS_AS(TrainConfig::from_text("medium_update_period = 0\n"), DataError);
  CHECK_THROWS_AS(TrainConfig::from_text("iterations 3\n"), DataError);
}

TEST_CASE("init from points") {
  CHECK_THROWS_AS(init_cloud({}), std::invalid_argument);
  const GaussianCloud one = init_cloud({{{1, 2, 3}, {0.2, 0.4, 0.6}}});
  REQUIRE(one.size() == 1);
  CHECK(one.get(0).mean == Eigen::Vector3d(1, 2, 3));
  CHECK(one.get(0).color == Eigen::Vector3d(0.2, 0.4, 0.6));
  CHECK(one.get(0).opacity() == doctest::Approx(0.1));

  // four points on a unit square: mean distance to the 3 nearest is (1 + 1 + sqrt 2) / 3
  const GaussianCloud sq = init_cloud({{{0, 0, 0}, {}}, {{1, 0, 0}, {}}, {{0, 1, 0}, {}}, {{1, 1, 0}, {}}});
  for (std::size_t i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) CHECK(sq.get(i).scale()[k] == doctest::Approx((2 + std::sqrt(2.0)) / 3));

  CHECK(init_cloud_random(7, 30, {0, 0, 1}, 2.0) == init_cloud_random(7, 30, {0, 0, 1}, 2.0));
  CHECK_FALSE(init_cloud_random(7, 30, {0, 0, 1}, 2.0) == init_cloud_random(8, 30, {0, 0, 1}, 2.0));
  CHECK_THROWS_AS(init_cloud_random(7, 0, {0, 0, 1}, 2.0), std::invalid_argument);
}

TEST_CASE("point colors come back through the renderer") {
  // dense fronto-parallel grid of one color at z = 2
  std::vector<SparsePoint> pts;
  const Eigen::Vector3d col(0.3, 0.6, 0.9);
  for (int i = -15; i <= 15; ++i)
    for (int j = -15; j <= 15; ++j) pts.push_back({{i * 0.05, j * 0.05, 2.0}, col});
  GaussianCloud cloud = init_cloud(pts);
  for (std::size_t i = 0; i < cloud.size(); ++i) cloud.opacity_logits[i] = logit_from_opacity(0.9);
  CameraView cam;
  cam.width = cam.height = 16;
  cam.intrinsics = {20, 20, 8, 8};
  const RgbImage out = to_rgb_image(render(CloudParams::constants(cloud), cam).color);
  for (std::size_t y = 4; y < 12; ++y)
    for (std::size_t x = 4; x < 12; ++x)
      for (int c = 0; c < 3; ++c) CHECK(out.at(x, y, c) == doctest::Approx(col[c]).epsilon(0.01));
}

TEST_CASE("zero learning rates leave the state unchanged") {
  const SceneDataset ds = small_scene(1, true);
  TrainConfig c = quick_config(1);
  c.lr_means = c.lr_means_final = c.lr_scales = c.lr_rotation = c.lr_opacity = c.lr_color = c.lr_medium = 0.0;
  c.medium_update_period = 1;
  TrainState s = make_initial_state(c, ds);
  const GaussianCloud before = s.cloud;
  const MediumParams m = s.medium;
  const StepResult r = train_step(s, ds.frames[ds.train[0]], c);
  CHECK(std::isfinite(r.loss.total));
  CHECK(r.medium_stepped);
  CHECK(s.cloud == before);
  CHECK(s.medium.beta_d_raw == m.beta_d_raw);
  CHECK(s.medium.b_inf_raw == m.b_inf_raw);
}

TEST_CASE("a single white splat learns a white pixel") {
  Frame f;
  f.camera.width = f.camera.height = 1;
  f.camera.intrinsics = {1, 1, 0.5, 0.5};
  f.image = RgbImage(1, 1, 1.0);
  TrainConfig c;
  c.iterations = 10;
  c.medium_enabled = false;
  c.loss.lambda_dssim = 0.0;
  c.loss.weights = {};
  c.loss.weights.backscatter = c.loss.weights.grayworld = c.loss.weights.saturation = 0.0;
  c.loss.weights.opacity = c.loss.weights.depth_smooth = c.loss.weights.depth_recon = 0.0;
  SceneDataset ds;
  ds.points.push_back({{0, 0, 2}, {1, 1, 1}});
  TrainState s = make_initial_state(c, ds);
  REQUIRE(s.cloud.size() == 1);
  double last = INFINITY;
  for (int i = 0; i < 10; ++i) {
    const double l = train_step(s, f, c).loss.total;
    CHECK(l < last);
    last = l;
  }
}

TEST_CASE("medium stays frozen with an infinite update period") {
  const SceneDataset ds = small_scene(2, true);
  TrainConfig c = quick_config(6);
  c.medium_update_period = kNever;
  const TrainResult r = run_training(make_initial_state(c, ds), c, ds, std::nullopt);
  const MediumParams init = MediumParams::initial();
  CHECK(r.state.medium.beta_d_raw == init.beta_d_raw);
  CHECK(r.state.medium.beta_b_raw == init.beta_b_raw);
  CHECK(r.state.medium.b_inf_raw == init.b_inf_raw);
}

TEST_CASE("densify and prune rules") {
  const SceneDataset ds = small_scene(3, false);
  TrainConfig c = quick_config(1);
  TrainState s = make_initial_state(c, ds);
  s.cloud = {};
  s.cloud.push_back(Gaussian::isotropic({0, 0, 2}, 0.5, 0.8, {0.5, 0.5, 0.5}));
  s.cloud.push_back(Gaussian::isotropic({0.5, 0, 2}, 0.001, 0.8, {0.5, 0.5, 0.5}));
  s.cloud.push_back(Gaussian::isotropic({-0.5, 0, 2}, 0.01, 0.8, {0.5, 0.5, 0.5}));
  s.stats.resize(3);
  const double extent = 2.0;  // split above 0.02

  SUBCASE("nothing above threshold keeps the cloud") {
    const GaussianCloud before = s.cloud;
    densify_and_prune(s, c, extent);
    CHECK(s.cloud == before);
  }
  SUBCASE("a large splat above threshold is split in two") {
    s.stats.grad_accum[0] = 1.0;
    s.stats.count[0] = 1;
    densify_and_prune(s, c, extent);
    CHECK(s.cloud.size() == 4);
    CHECK(s.cloud.get(3).scale()[0] == doctest::Approx(0.5 / 1.6));
  }
  SUBCASE("a small splat above threshold is cloned") {
    s.stats.grad_accum[1] = 1.0;
    s.stats.count[1] = 1;
    densify_and_prune(s, c, extent);
    REQUIRE(s.cloud.size() == 4);
    CHECK(s.cloud.get(3).mean == s.cloud.get(1).mean);
  }
  SUBCASE("zero opacity is removed") {
    s.cloud.opacity_logits[2] = -1e3;
    densify_and_prune(s, c, extent);
    CHECK(s.cloud.size() == 2);
  }
  SUBCASE("removing everything is an error") {
    for (auto& o : s.cloud.opacity_logits) o = -1e3;
    CHECK_THROWS_AS(densify_and_prune(s, c, extent), NumericError);
  }
  CHECK(s.stats.count.size() == s.cloud.size());
}

TEST_CASE("zero iterations return the initialization") {
  const SceneDataset ds = small_scene(4, true);
  const TrainConfig c = quick_config(0);
  const TrainState init = make_initial_state(c, ds);
  const TrainResult r = run_training(init, c, ds, std::nullopt);
  CHECK(same_state(r.state, init));
}

TEST_CASE("checkpoint resume is bit identical") {
  const SceneDataset ds = small_scene(5, true);
  const TrainConfig full = quick_config(16);
  const TrainResult straight = run_training(make_initial_state(full, ds), full, ds, std::nullopt);

  // resume from a checkpoint written part way through the full run
  const fs::path dir = scratch_dir("resume");
  TrainConfig ck = full;
  ck.checkpoint_interval = 8;
  run_training(make_initial_state(ck, ds), ck, ds, dir);
  REQUIRE(fs::exists(dir / "checkpoints" / "iter_8"));
  const TrainState mid = load_checkpoint(dir / "checkpoints" / "iter_8");
  CHECK(mid.iteration == 8);
  const TrainResult resumed = run_training(mid, full, ds, std::nullopt);
  CHECK(same_state(resumed.state, straight.state));

  const TrainState fin = load_checkpoint(dir / "final");
  CHECK(same_state(fin, straight.state));
  CHECK(fin.rng == straight.state.rng);
  CHECK(fin.order == straight.state.order);
  fs::remove_all(dir);
}

TEST_CASE("same seed and config give the same metrics file") {
  const SceneDataset ds = small_scene(6, true);
  TrainConfig c = quick_config(10);
  c.eval_interval = 5;
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_training(make_initial_state(c, ds), c, ds, a);
  run_training(make_initial_state(c, ds), c, ds, b);
  const std::string ma = slurp(a / "metrics.csv");
  CHECK(!ma.empty());
  CHECK(ma == slurp(b / "metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("evaluation of the true scene") {
  const SceneDataset ds = small_scene(7, true);
  // identical render and target: psnr sentinel, ssim 1
  const RgbImage img = ds.frames[0].image;
  CHECK(psnr(img, img) == kPsnrInfinity);
  CHECK(ssim(img, img) == doctest::Approx(1.0));

  const TrainConfig c = quick_config(1);
  TrainState s = make_initial_state(c, ds);
  const EvalRecord e = evaluate(s.cloud, *ds.medium_truth, true, Uncovered::kOpenWater, ds, ds.test);
  REQUIRE(e.b_inf_error);
  for (int k = 0; k < 3; ++k) {
    CHECK((*e.beta_d_error)[k] == 0.0);
    CHECK((*e.beta_b_error)[k] == 0.0);
    CHECK((*e.b_inf_error)[k] == 0.0);
  }
  CHECK(e.frames.size() == ds.test.size());
  CHECK(e.mean_depth_rmse.has_value());
  CHECK(e.mean_restored_psnr.has_value());
}

TEST_CASE("ablated medium renders plain splats") {
  const SceneDataset ds = small_scene(8, false);
  const TrainConfig c = quick_config(1);
  const TrainState s = make_initial_state(c, ds);
  const CameraView& cam = ds.frames[0].camera;
  const RenderedView v = render_view(s.cloud, MediumParams::preset(MediumPreset::kWater), false, Uncovered::kOpenWater, cam);
  const RgbImage plain = to_rgb_image(render(CloudParams::constants(s.cloud), cam).color);
  CHECK(v.composed.data() == plain.data());
  CHECK(v.true_color.data() == plain.data());
}
