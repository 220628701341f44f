#include "uwsplat/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <unistd.h>

#include "uwsplat/dataset.hpp"
#include "uwsplat/image_io.hpp"
#include "uwsplat/losses.hpp"
#include "uwsplat/optimizer.hpp"
#include "uwsplat/raster_vars.hpp"

namespace uwsplat::verify {

bool all_pass(const Suite& s) {
  return std::all_of(s.begin(), s.end(), [](const Check& c) { return c.pass; });
}

std::string format(const Check& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s %-44s %.3e (limit %.1e)", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.value,
                c.limit);
  return buf;
}

namespace {

Check make(std::string name, double value, double limit) {
  return {std::move(name), value, limit, value < limit};
}

}  // namespace

CameraView front_camera(std::size_t size, double focal) {
  CameraView cam;
  cam.intrinsics = {focal, focal, size / 2.0, size / 2.0};
  cam.width = size;
  cam.height = size;
  return cam;
}

GaussianCloud random_cloud(std::mt19937_64& rng, std::size_t n, double focal, double half_extent) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  GaussianCloud cloud;
  for (std::size_t i = 0; i < n; ++i) {
    Gaussian s;
    const double z = 1.0 + 2.0 * u(rng);
    const double px = (2.0 * u(rng) - 1.0) * half_extent * 1.2;
    const double py = (2.0 * u(rng) - 1.0) * half_extent * 1.2;
    s.mean = {px * z / focal, py * z / focal, z};
    for (int k = 0; k < 3; ++k) s.log_scale[k] = std::log(z / focal * (0.6 + 3.0 * u(rng)));
    s.rotation = Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng)).normalized();
    s.opacity_logit = logit_from_opacity(0.05 + 0.9 * u(rng));
    s.color = {u(rng), u(rng), u(rng)};
    cloud.push_back(s);
  }
  return cloud;
}

RgbImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  RgbImage img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

ScalarMap random_map(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarMap m(w, h);
  for (float& v : m.data()) v = static_cast<float>(u(rng));
  return m;
}

MediumParams random_medium(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> beta(0.05, 4.0), veil(0.02, 0.98);
  return MediumParams::from_activated({beta(rng), beta(rng), beta(rng)}, {beta(rng), beta(rng), beta(rng)},
                                      {veil(rng), veil(rng), veil(rng)});
}

std::vector<double> flatten(const GaussianCloud& c) {
  std::vector<double> v;
  for (const auto* buf : {&c.means, &c.log_scales, &c.rotations, &c.opacity_logits, &c.colors})
    v.insert(v.end(), buf->begin(), buf->end());
  return v;
}

CloudParams unflatten(const ad::Var& v, std::size_t n) {
  CloudParams p;
  std::size_t off = 0;
  auto take = [&](ad::Shape s) {
    ad::Var out = ad::slice(v, off, s);
    off += ad::element_count(s);
    return out;
  };
  p.means = take({n, 3});
  p.log_scales = take({n, 3});
  p.rotations = take({n, 4});
  p.opacity_logits = take({n});
  p.colors = take({n, 3});
  return p;
}

Check water_oracle() {
  // Independently evaluated: b_inf (1 - exp(-beta_b)) + exp(-beta_d) at z = 1.
  const double expected[3] = {0.13380377, 0.25418125, 0.45912607};
  RgbImage white(4, 4);
  for (double& v : white.data()) v = 1.0;
  const RgbImage out = compose(white, ScalarMap(4, 4, 1.0f), MediumParams::preset(MediumPreset::kWater));
  double worst = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) worst = std::max(worst, std::abs(out.data()[i] - expected[i % 3]));
  return make("water preset, white at 1 m", worst, 1e-4);
}

Check renderer_oracle(std::uint64_t seed, int clouds) {
  std::mt19937_64 rng(seed);
  const CameraView cam = front_camera(16, 20.0);
  double worst = 0.0;
  for (int t = 0; t < clouds; ++t) {
    const GaussianCloud c = random_cloud(rng, 1 + rng() % 50, 20.0, 8.0);
    const RasterImages a = render_images(c, cam);
    const RasterImages b = render_bruteforce(c, cam);
    for (std::size_t i = 0; i < a.color.size(); ++i) worst = std::max(worst, std::abs(a.color[i] - b.color[i]));
    for (std::size_t i = 0; i < a.alpha.size(); ++i) worst = std::max(worst, std::abs(a.alpha[i] - b.alpha[i]));
  }
  return make("renderer vs brute force (" + std::to_string(clouds) + " clouds)", worst, 1e-4);
}

Suite detach_contracts(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const CameraView cam = front_camera(12, 14.0);
  const GaussianCloud c = random_cloud(rng, 10, 14.0, 6.0);
  const RgbImage img = random_image(rng, 12, 12, 0.05, 0.6);
  Suite out;
  double cloud_grad = 0.0, medium_grad = 0.0;
  for (Uncovered mode : {Uncovered::kOpenWater, Uncovered::kZeroRange}) {
    const CloudParams cp = CloudParams::parameters(c);
    const RenderOutput r = render(cp, cam);
    const ad::Var raw = ad::parameter(MediumParams::initial().raw(), {9});
    LossInputs in;
    in.captured = &img;
    in.true_color = r.color;
    in.depth = r.depth;
    in.alpha = r.alpha;
    in.medium = MediumVars::from_raw(raw);
    in.uncovered = mode;
    LossConfig cfg;
    cfg.weights = {0, 1, 0, 0, 0, 0, 0};
    ad::backward(total_loss(in, cfg).total);
    for (const ad::Var* v : {&cp.means, &cp.log_scales, &cp.rotations, &cp.opacity_logits, &cp.colors})
      for (double g : v->grad()) cloud_grad = std::max(cloud_grad, std::abs(g));
    for (double g : raw.grad()) medium_grad += std::abs(g);
  }
  out.push_back(make("backscatter term, max |d/d cloud|", cloud_grad, 1e-300));
  out.push_back(make("backscatter term reaches the medium", medium_grad > 0.0 ? 0.0 : 1.0, 0.5));

  // depth-weighted reconstruction: the rendered depth is a leaf here
  const ScalarMap zmap = random_map(rng, 12, 12, 0.2, 2.0);
  const ad::Var depth = ad::parameter(std::vector<double>(zmap.data().begin(), zmap.data().end()), {12, 12});
  const ad::Var j = ad::parameter(random_image(rng, 12, 12).data(), {12, 12, 3});
  const ad::Var alpha = ad::parameter(std::vector<double>(144, 0.7), {12, 12});
  LossInputs in;
  in.captured = &img;
  in.true_color = j;
  in.depth = depth;
  in.alpha = alpha;
  in.medium = MediumVars::constants(MediumParams::preset(MediumPreset::kWater));
  LossConfig cfg;
  cfg.weights = {0, 0, 0, 0, 0, 0, 1};
  ad::backward(total_loss(in, cfg).total);
  double zg = 0.0, jg = 0.0;
  for (double g : depth.grad()) zg = std::max(zg, std::abs(g));
  for (double g : j.grad()) jg += std::abs(g);
  out.push_back(make("depth-weighted term, max |d/d depth|", zg, 1e-300));
  out.push_back(make("depth-weighted term reaches the color", jg > 0.0 ? 0.0 : 1.0, 0.5));
  return out;
}

Check restore_roundtrip(std::uint64_t seed, int draws) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int d = 0; d < draws; ++d) {
    const MediumParams p = random_medium(rng);
    const RgbImage j = random_image(rng, 32, 32);
    const ScalarMap z = random_map(rng, 32, 32, 0.0, 3.0);
    const RgbImage back = restore(compose(j, z, p), z, p);
    for (std::size_t i = 0; i < j.data().size(); ++i) worst = std::max(worst, std::abs(back.data()[i] - j.data()[i]));
  }
  return make("restore(compose) over " + std::to_string(draws) + " media", worst, 1e-5);
}

Check medium_recovery(std::uint64_t seed, int steps) {
  SyntheticSpec spec;
  spec.width = spec.height = 32;
  spec.views = 4;
  spec.supersample = 1;
  SceneDataset ds = generate_synthetic_scene(seed, spec);
  const MediumParams truth = MediumParams::preset(MediumPreset::kWater);
  apply_medium(ds, truth);

  std::vector<ad::Var> colors, depths;
  std::vector<RgbImage> targets;
  for (const Frame& f : ds.frames) {
    colors.push_back(to_var(*f.true_color));
    depths.push_back(to_var(*f.depth));
    targets.push_back(f.image);
  }
  std::vector<double> raw = MediumParams::initial().raw();
  AdamState adam;
  for (int it = 0; it < steps; ++it) {
    const ad::Var p = ad::parameter(raw, {9});
    const MediumVars m = MediumVars::from_raw(p);
    ad::Var loss = ad::scalar(0.0);
    for (std::size_t k = 0; k < colors.size(); ++k)
      loss = ad::add(loss, ad::mean(ad::square(ad::sub(compose(colors[k], depths[k], m), to_var(targets[k])))));
    ad::backward(loss);
    // 0.05 decaying to 5e-5 so the last steps settle
    const double lr = 0.05 * std::pow(1e-3, static_cast<double>(it) / std::max(1, steps - 1));
    adam_step(raw, p.grad(), adam, lr);
  }
  const MediumParams fit = MediumParams::from_raw(raw);
  double worst = 0.0;
  for (int c = 0; c < 3; ++c) {
    worst = std::max(worst, std::abs(fit.beta_d()[c] - truth.beta_d()[c]));
    worst = std::max(worst, std::abs(fit.beta_b()[c] - truth.beta_b()[c]));
    worst = std::max(worst, std::abs(fit.b_inf()[c] - truth.b_inf()[c]));
  }
  return make("medium fit from true color and depth", worst, 1e-2);
}

namespace {

constexpr double kRelTol = 1e-3;

Check fd(const std::string& name, const std::function<ad::Var(const ad::Var&)>& f, const std::vector<double>& at) {
  const ad::GradCheckResult r = ad::finite_diff_check(f, at, 1e-4);
  double norm = 0.0;
  for (double g : r.analytic) norm = std::max(norm, std::abs(g));
  // an all-zero gradient would pass trivially
  return make(name, norm > 0.0 ? r.max_error : INFINITY, kRelTol);
}

std::vector<double> concat(std::initializer_list<std::vector<double>> parts) {
  std::vector<double> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Moves values away from a hinge at `at` by at least `margin`.
void keep_off(double& v, double at, double margin) {
  if (std::abs(v - at) < margin) v = at + (v >= at ? margin : -margin);
}

}  // namespace

Suite gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Suite out;
  const MediumParams water = MediumParams::preset(MediumPreset::kWater);

  {  // L_GS: SSIM needs an 11x11 window, L1 alone runs at 8x8
    const RgbImage j = random_image(rng, 11, 11, 0.2, 0.8);
    RgbImage target = random_image(rng, 11, 11, 0.2, 0.8);
    for (std::size_t i = 0; i < j.data().size(); ++i) keep_off(target.data()[i], j.data()[i], 0.01);
    out.push_back(fd("L_GS (l1 + d-ssim, 11x11)", [&](const ad::Var& v) {
      return loss_gs(ad::reshape(v, {11, 11, 3}), target, 0.2);
    }, j.data()));
    const RgbImage j8 = random_image(rng, 8, 8, 0.2, 0.8);
    RgbImage t8 = random_image(rng, 8, 8, 0.2, 0.8);
    for (std::size_t i = 0; i < j8.data().size(); ++i) keep_off(t8.data()[i], j8.data()[i], 0.01);
    out.push_back(fd("L_GS (l1 only, 8x8)", [&](const ad::Var& v) {
      return loss_gs(ad::reshape(v, {8, 8, 3}), t8, 0.0);
    }, j8.data()));
  }

  const ScalarMap z = random_map(rng, 8, 8, 0.2, 3.0);
  const ScalarMap cover = random_map(rng, 8, 8, 0.0, 1.0);
  {  // backscatter prior w.r.t. the raw medium, both coverage modes
    for (Uncovered mode : {Uncovered::kZeroRange, Uncovered::kOpenWater}) {
      const MediumVars m = MediumVars::constants(water);
      const ad::Var b = mode == Uncovered::kOpenWater ? backscatter(m, to_var(z), to_var(cover)) : backscatter(m, to_var(z));
      RgbImage img = random_image(rng, 8, 8, 0.05, 0.6);
      for (std::size_t i = 0; i < img.data().size(); ++i) keep_off(img.data()[i], b.value()[i], 0.01);
      out.push_back(fd(mode == Uncovered::kOpenWater ? "L_bs w.r.t. medium (open water)" : "L_bs w.r.t. medium",
                       [&, mode](const ad::Var& v) {
                         const MediumVars mv = MediumVars::from_raw(v);
                         const ad::Var bh = mode == Uncovered::kOpenWater ? backscatter(mv, to_var(z), to_var(cover))
                                                                          : backscatter(mv, to_var(z));
                         return loss_backscatter(img, bh, 5.0);
                       },
                       water.raw()));
    }
  }
  {
    const RgbImage j = random_image(rng, 8, 8);
    out.push_back(fd("L_gw", [&](const ad::Var& v) { return loss_grayworld(ad::reshape(v, {8, 8, 3})); }, j.data()));
    RgbImage js = random_image(rng, 8, 8);
    for (double& x : js.data()) keep_off(x, 0.7, 0.01);
    out.push_back(fd("L_sat", [&](const ad::Var& v) { return loss_saturation(ad::reshape(v, {8, 8, 3}), 0.7); },
                     js.data()));
  }
  {  // depth-weighted reconstruction w.r.t. true color and medium
    const RgbImage j = random_image(rng, 8, 8);
    const ad::Var ihat = compose(to_var(j), to_var(z), MediumVars::constants(water));
    RgbImage img = random_image(rng, 8, 8);
    for (std::size_t i = 0; i < img.data().size(); ++i) keep_off(img.data()[i], ihat.value()[i], 0.01);
    out.push_back(fd("L_Z-recon w.r.t. color and medium", [&](const ad::Var& v) {
      const ad::Var jv = ad::reshape(ad::slice(v, 0, {192}), {8, 8, 3});
      const MediumVars mv = MediumVars::from_raw(ad::slice(v, 192, {9}));
      return loss_depth_weighted_recon(img, compose(jv, to_var(z), mv), to_var(z));
    }, concat({j.data(), water.raw()})));
  }
  {  // edge-aware smoothness w.r.t. depth, kept off |dZ| = 0
    const RgbImage img = random_image(rng, 8, 8);
    ScalarMap zs(8, 8);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) zs.at(x, y) = static_cast<float>(0.5 + 0.13 * x + 0.07 * y + 0.05 * ((x * 7 + y * 3) % 5));
    std::vector<double> zd(zs.data().begin(), zs.data().end());
    out.push_back(fd("L_Z-smooth w.r.t. depth", [&](const ad::Var& v) {
      return loss_depth_smooth(img, ad::reshape(v, {8, 8}));
    }, zd));
  }
  {  // opacity prior: half of the pixels sit on the veil color
    RgbImage img = random_image(rng, 8, 8);
    for (std::size_t p = 0; p < 64; p += 2)
      for (int c = 0; c < 3; ++c) img.data()[p * 3 + c] = water.b_inf()[c] + 0.01;
    const ScalarMap a = random_map(rng, 8, 8, 0.1, 0.9);
    out.push_back(fd("L_op w.r.t. alpha", [&](const ad::Var& v) {
      return loss_opacity_background(img, ad::reshape(v, {8, 8}), water.b_inf(), 0.02);
    }, std::vector<double>(a.data().begin(), a.data().end())));
  }
  {  // medium model w.r.t. everything it reads
    const RgbImage j = random_image(rng, 8, 8);
    const RgbImage w = random_image(rng, 8, 8, -1.0, 1.0);
    const std::vector<double> zd(z.data().begin(), z.data().end());
    const std::vector<double> ad_(cover.data().begin(), cover.data().end());
    for (Uncovered mode : {Uncovered::kZeroRange, Uncovered::kOpenWater}) {
      out.push_back(fd(mode == Uncovered::kOpenWater ? "medium compose (open water)" : "medium compose",
                       [&, mode](const ad::Var& v) {
                         const MediumVars mv = MediumVars::from_raw(ad::slice(v, 0, {9}));
                         const ad::Var jv = ad::reshape(ad::slice(v, 9, {192}), {8, 8, 3});
                         const ad::Var zv = ad::reshape(ad::slice(v, 201, {64}), {8, 8});
                         const ad::Var av = ad::reshape(ad::slice(v, 265, {64}), {8, 8});
                         return ad::sum(ad::mul(compose(jv, zv, av, mv, mode), to_var(w)));
                       },
                       concat({water.raw(), j.data(), zd, ad_})));
    }
  }
  {  // renderer: color, depth and alpha against random weights
    const CameraView cam = front_camera(8, 10.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      const GaussianCloud c = random_cloud(rng, 4 + 2 * trial, 10.0, 4.0);
      std::vector<double> wc(192), wd(64), wa(64);
      for (double& x : wc) x = u(rng);
      for (double& x : wd) x = u(rng);
      for (double& x : wa) x = u(rng);
      const Check ch = fd("renderer", [&](const ad::Var& v) {
        const RenderOutput r = render(unflatten(v, c.size()), cam);
        return ad::add(ad::add(ad::sum(ad::mul(r.color, ad::constant(wc, {8, 8, 3}))),
                               ad::sum(ad::mul(r.depth, ad::constant(wd, {8, 8})))),
                       ad::sum(ad::mul(r.alpha, ad::constant(wa, {8, 8}))));
      }, flatten(c));
      worst = std::max(worst, ch.value);
    }
    out.push_back(make("renderer (4..10 splats, 8x8)", worst, kRelTol));
  }
  return out;
}

Suite oracle_suite() {
  Suite s{water_oracle(), renderer_oracle(2024, 100)};
  for (Check& c : detach_contracts(7)) s.push_back(std::move(c));
  return s;
}

Suite roundtrip_suite() {
  Suite s{restore_roundtrip(99, 50)};
  std::mt19937_64 rng(5);
  const auto dir = std::filesystem::temp_directory_path() / ("uwsplat_roundtrip_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  ScalarMap m = random_map(rng, 17, 9, 0.0, 5.0);
  m.at(3, 4) = INFINITY;
  save_scalar_map(m, dir / "z.fmap");
  const ScalarMap back = load_scalar_map(dir / "z.fmap");
  double diff = back.data() == m.data() ? 0.0 : 1.0;
  s.push_back(make("fmap bit-exact", diff, 0.5));

  const MediumParams p = random_medium(rng);
  save_medium(p, dir / "medium.txt");
  s.push_back(make("medium file exact", load_medium(dir / "medium.txt") == p ? 0.0 : 1.0, 0.5));

  const RgbImage img = random_image(rng, 9, 7);
  save_image(img, dir / "img.png", PngDepth::k16);
  const RgbImage again = load_image(dir / "img.png");
  double worst = 0.0;
  for (std::size_t i = 0; i < img.data().size(); ++i) worst = std::max(worst, std::abs(again.data()[i] - img.data()[i]));
  s.push_back(make("16-bit png quantization", worst, 0.5 / 65535.0 + 1e-12));
  std::filesystem::remove_all(dir);
  return s;
}

}  // namespace uwsplat::verify
