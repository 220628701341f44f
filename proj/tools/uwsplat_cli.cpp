#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "uwsplat/config.hpp"
#include "uwsplat/dataset.hpp"
#include "uwsplat/errors.hpp"
#include "uwsplat/image_io.hpp"
#include "uwsplat/medium.hpp"
#include "uwsplat/trainer.hpp"
#include "uwsplat/verify.hpp"

namespace fs = std::filesystem;
using namespace uwsplat;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

MediumPreset parse_preset(const std::string& s) {
  if (s == "water") return MediumPreset::kWater;
  if (s == "fog") return MediumPreset::kFog;
  return MediumPreset::kNone;
}

// Training configuration that produced a checkpoint: explicit --config, else
// config.txt next to final/ or checkpoints/, else defaults.
TrainConfig config_for(const std::string& explicit_path, const fs::path& checkpoint) {
  if (!explicit_path.empty()) return TrainConfig::from_file(explicit_path);
  const fs::path dir = fs::absolute(checkpoint).lexically_normal();
  for (const fs::path& c : {dir.parent_path() / "config.txt", dir.parent_path().parent_path() / "config.txt"}) {
    if (fs::exists(c)) return TrainConfig::from_file(c);
  }
  return TrainConfig{};
}

// Pose file: key = value lines width, height, fx, fy, cx, cy, qvec (w x y z,
// world to camera) and tvec.
CameraView load_pose(const fs::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  CameraView cam;
  cam.width = static_cast<std::size_t>(kv.get_int("width", 0));
  cam.height = static_cast<std::size_t>(kv.get_int("height", 0));
  cam.intrinsics = {kv.get_double("fx", 0), kv.get_double("fy", 0), kv.get_double("cx", 0), kv.get_double("cy", 0)};
  const auto q = kv.get_doubles("qvec", 4);
  const auto t = kv.get_doubles("tvec", 3);
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(n > 0)) throw DataError(path.string() + ": zero quaternion");
  cam.rotation = quaternion_to_matrix(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
  cam.translation = {t[0], t[1], t[2]};
  if (const auto extra = kv.unused_keys(); !extra.empty()) throw DataError(path.string() + ": unknown key '" + extra[0] + "'");
  try {
    cam.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return cam;
}

// Piecewise-linear ramp through viridis control points.
std::array<double, 3> ramp(double t) {
  static constexpr double kStops[9][3] = {
      {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530}, {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558},
      {0.128, 0.567, 0.551}, {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.993, 0.906, 0.144}};
  t = std::clamp(t, 0.0, 1.0) * 8.0;
  const int i = std::min(7, static_cast<int>(t));
  const double f = t - i;
  return {kStops[i][0] + f * (kStops[i + 1][0] - kStops[i][0]), kStops[i][1] + f * (kStops[i + 1][1] - kStops[i][1]),
          kStops[i][2] + f * (kStops[i + 1][2] - kStops[i][2])};
}

// Pixels with no depth (0 or not finite) are drawn black.
RgbImage colorize_depth(const ScalarMap& z, float& lo, float& hi) {
  lo = INFINITY;
  hi = -INFINITY;
  for (float v : z.data()) {
    if (v > 0 && std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  RgbImage out(z.width(), z.height());
  if (!(hi >= lo)) {
    lo = hi = 0;
    return out;
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t y = 0; y < z.height(); ++y)
    for (std::size_t x = 0; x < z.width(); ++x) {
      const float v = z.at(x, y);
      if (!(v > 0 && std::isfinite(v))) continue;
      const auto c = ramp((v - lo) / span);
      for (int k = 0; k < 3; ++k) out.at(x, y, k) = c[k];
    }
  return out;
}

int cmd_synth(const std::string& spec_path, const std::string& medium, const std::string& out, std::uint64_t seed) {
  const SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : SyntheticSpec::from_file(spec_path);
  SceneDataset ds = generate_synthetic_scene(seed, spec);
  if (medium != "none") apply_medium(ds, MediumParams::preset(parse_preset(medium)));
  save_dataset(ds, out);
  std::printf("wrote %zu views (%zu train, %zu test), %zu points to %s\n", ds.frames.size(), ds.train.size(),
              ds.test.size(), ds.points.size(), out.c_str());
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out, const std::string& resume) {
  const SceneDataset ds = load_dataset(data);
  const TrainConfig cfg = config.empty() ? TrainConfig{} : TrainConfig::from_file(config);
  fs::create_directories(out);
  if (!config.empty()) {
    fs::copy_file(config, fs::path(out) / "config.txt", fs::copy_options::overwrite_existing);
  } else {
    std::ofstream(fs::path(out) / "config.txt") << "# defaults\n";
  }
  TrainState state = resume.empty() ? make_initial_state(cfg, ds) : load_checkpoint(resume);
  TrainCallbacks cb;
  cb.log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
  const TrainResult r = run_training(std::move(state), cfg, ds, fs::path(out), cb);
  if (r.final_eval) {
    const EvalRecord& e = *r.final_eval;
    std::printf("test psnr %.3f ssim %.4f", e.mean_psnr, e.mean_ssim);
    if (e.mean_restored_psnr) std::printf(" restored psnr %.3f", *e.mean_restored_psnr);
    if (e.mean_depth_rmse) std::printf(" depth rmse %.4f", *e.mean_depth_rmse);
    std::printf("\n");
  }
  std::printf("%zu splats, output in %s\n", r.state.cloud.size(), out.c_str());
  return 0;
}

int cmd_render(const std::string& checkpoint, const std::string& data, const std::string& view, const std::string& mode,
               const std::string& out, const std::string& config) {
  const TrainState st = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_for(config, checkpoint);
  CameraView cam;
  if (fs::exists(view) && !fs::is_directory(view)) {
    cam = load_pose(view);
  } else {
    std::size_t idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoul(view, &used);
      if (used != view.size()) throw std::invalid_argument(view);
    } catch (const std::exception&) {
      throw UsageError("--view must be a frame index or an existing pose file, got '" + view + "'");
    }
    if (data.empty()) throw UsageError("--view with an index needs --data");
    const SceneDataset ds = load_dataset(data);
    if (idx >= ds.frames.size())
      throw DataError("view index " + std::to_string(idx) + " out of range (" + std::to_string(ds.frames.size()) + " frames)");
    cam = ds.frames[idx].camera;
  }
  const RenderedView v = render_view(st.cloud, st.medium, cfg.medium_enabled, cfg.uncovered, cam, cfg.render);
  if (mode == "in-medium") {
    save_image(v.composed, out, PngDepth::k16);
  } else if (mode == "restored") {
    save_image(v.true_color, out, PngDepth::k16);
  } else if (mode == "alpha") {
    save_gray_image(v.alpha, out);
  } else {
    float lo = 0, hi = 0;
    save_image(colorize_depth(v.depth, lo, hi), out);
    const fs::path raw = fs::path(out).replace_extension(".fmap");
    save_scalar_map(v.depth, raw);
    std::printf("depth range %.6g .. %.6g, raw values in %s\n", lo, hi, raw.c_str());
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_restore(const std::string& images, const std::string& depths, const std::string& medium_file,
                const std::string& out) {
  const MediumParams p = load_medium(medium_file);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(images))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .png files in " + images);
  fs::create_directories(out);
  for (const fs::path& f : files) {
    const fs::path zpath = fs::path(depths) / (f.stem().string() + ".fmap");
    if (!fs::exists(zpath)) throw DataError("missing depth " + zpath.string());
    const RgbImage img = load_image(f);
    const ScalarMap z = load_scalar_map(zpath);
    if (!z.same_size(img)) throw DataError(zpath.string() + ": size differs from " + f.string());
    save_image(restore(img, z, p, {.clamp_for_display = true}), fs::path(out) / f.filename(), PngDepth::k16);
  }
  std::printf("restored %zu images into %s\n", files.size(), out.c_str());
  return 0;
}

std::string opt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", *v);
  return buf;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& out, const std::string& split,
             const std::string& config) {
  const TrainState st = load_checkpoint(checkpoint);
  const TrainConfig cfg = config_for(config, checkpoint);
  const SceneDataset ds = load_dataset(data);
  std::vector<std::size_t> frames = split == "train" ? ds.train : ds.test;
  if (split == "all") {
    frames.resize(ds.frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = i;
  }
  if (frames.empty()) throw DataError("no frames in split '" + split + "'");
  const EvalRecord e = evaluate(st.cloud, st.medium, cfg.medium_enabled, cfg.uncovered, ds, frames, cfg.render);
  std::ofstream f(out);
  if (!f) throw DataError("cannot write " + out);
  f << "frame,psnr,ssim,restored_psnr,depth_rmse\n";
  char buf[64];
  for (const FrameMetrics& m : e.frames) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", m.psnr, m.ssim);
    f << m.name << ',' << buf << ',' << opt(m.restored_psnr) << ',' << opt(m.depth_rmse) << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.9g,%.9g", e.mean_psnr, e.mean_ssim);
  f << "mean," << buf << ',' << opt(e.mean_restored_psnr) << ',' << opt(e.mean_depth_rmse) << '\n';
  if (e.b_inf_error) {
    auto row = [&](const char* name, const Rgb& v) {
      f << name;
      for (double x : v) f << ',' << opt(x);
      f << ",\n";
    };
    f << "param_error,r,g,b,\n";
    row("beta_d", *e.beta_d_error);
    row("beta_b", *e.beta_b_error);
    row("b_inf", *e.b_inf_error);
  }
  if (!f) throw DataError("short write to " + out);
  std::printf("%zu frames: psnr %.3f ssim %.4f\n", e.frames.size(), e.mean_psnr, e.mean_ssim);
  return 0;
}

int cmd_check(const std::string& suite) {
  verify::Suite s;
  if (suite == "oracle" || suite == "all") {
    const auto o = verify::oracle_suite();
    s.insert(s.end(), o.begin(), o.end());
  }
  if (suite == "roundtrip" || suite == "all") {
    const auto r = verify::roundtrip_suite();
    s.insert(s.end(), r.begin(), r.end());
  }
  if (suite == "medium" || suite == "all") s.push_back(verify::medium_recovery(5, 30000));
  if (suite == "grads" || suite == "all") {
    const auto g = verify::gradient_suite(11);
    s.insert(s.end(), g.begin(), g.end());
  }
  for (const verify::Check& c : s) std::printf("%s\n", verify::format(c).c_str());
  const bool ok = verify::all_pass(s);
  std::printf("%s: %s\n", suite.c_str(), ok ? "all passed" : "FAILED");
  return ok ? 0 : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian splatting through a scattering medium"};
  app.require_subcommand(1, 1);

  std::string spec, medium = "water", out, data, config, resume, checkpoint, view, mode = "in-medium", images, depths,
                     medium_file, split = "test", suite = "all";
  std::uint64_t seed = 1;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec, "synthetic scene spec (key = value)")->check(CLI::ExistingFile);
  synth->add_option("--medium", medium, "water, fog or none")->check(CLI::IsMember({"water", "fog", "none"}));
  synth->add_option("--out", out, "dataset directory")->required();
  synth->add_option("--seed", seed, "generator seed");

  auto* train = app.add_subcommand("train", "fit splats and medium to a dataset");
  train->add_option("--data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--config", config, "training config (key = value)")->check(CLI::ExistingFile);
  train->add_option("--out", out, "run directory")->required();
  train->add_option("--resume", resume, "checkpoint directory to continue from")->check(CLI::ExistingDirectory);

  auto* render = app.add_subcommand("render", "render one view of a checkpoint");
  render->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingDirectory);
  render->add_option("--view", view, "frame index into --data, or a pose file")->required();
  render->add_option("--data", data, "dataset the index refers to")->check(CLI::ExistingDirectory);
  render->add_option("--mode", mode)->check(CLI::IsMember({"in-medium", "restored", "depth", "alpha"}));
  render->add_option("--out", out, "PNG path; depth also writes a .fmap beside it")->required();
  render->add_option("--config", config, "training config (default: the run's config.txt)")->check(CLI::ExistingFile);

  auto* rest = app.add_subcommand("restore", "remove the medium from RGB-D images");
  rest->add_option("--images", images)->required()->check(CLI::ExistingDirectory);
  rest->add_option("--depths", depths, "FMAP files named <image stem>.fmap")->required()->check(CLI::ExistingDirectory);
  rest->add_option("--medium-file", medium_file)->required()->check(CLI::ExistingFile);
  rest->add_option("--out", out)->required();

  auto* eval = app.add_subcommand("eval", "metrics of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", data)->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out, "CSV path")->required();
  eval->add_option("--split", split)->check(CLI::IsMember({"test", "train", "all"}));
  eval->add_option("--config", config)->check(CLI::ExistingFile);

  auto* check = app.add_subcommand("check", "run built-in verification suites");
  check->add_option("--suite", suite)->check(CLI::IsMember({"grads", "oracle", "roundtrip", "medium", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) return cmd_synth(spec, medium, out, seed);
    if (*train) return cmd_train(data, config, out, resume);
    if (*render) return cmd_render(checkpoint, data, view, mode, out, config);
    if (*rest) return cmd_restore(images, depths, medium_file, out);
    if (*eval) return cmd_eval(checkpoint, data, out, split, config);
    if (*check) return cmd_check(suite);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
