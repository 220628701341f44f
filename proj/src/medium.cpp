#include "uwsplat/medium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "uwsplat/config.hpp"
#include "uwsplat/errors.hpp"

namespace uwsplat {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

namespace {

Rgb map3(const Rgb& v, double (*f)(double)) { return {f(v[0]), f(v[1]), f(v[2])}; }

}  // namespace

Rgb MediumParams::beta_d() const { return map3(beta_d_raw, softplus); }
Rgb MediumParams::beta_b() const { return map3(beta_b_raw, softplus); }
Rgb MediumParams::b_inf() const { return map3(b_inf_raw, sigmoid); }

MediumParams MediumParams::from_activated(const Rgb& beta_d, const Rgb& beta_b, const Rgb& b_inf) {
  MediumParams p;
  for (int c = 0; c < 3; ++c) {
    p.beta_d_raw[c] = inverse_softplus(std::max(beta_d[c], 1e-12));
    p.beta_b_raw[c] = inverse_softplus(std::max(beta_b[c], 1e-12));
    p.b_inf_raw[c] = logit(std::clamp(b_inf[c], 1e-9, 1.0 - 1e-9));
  }
  return p;
}

MediumParams MediumParams::initial() { return from_activated({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {0.2, 0.3, 0.4}); }

MediumParams MediumParams::preset(MediumPreset preset) {
  switch (preset) {
    case MediumPreset::kWater:
      return from_activated({2.6, 2.4, 1.8}, {1.9, 1.7, 1.4}, {0.07, 0.2, 0.39});
    case MediumPreset::kFog:
      return from_activated({2.4, 2.4, 2.4}, {2.4, 2.4, 2.4}, {0.8, 0.8, 0.8});
    case MediumPreset::kNone:
      return from_activated({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {0.5, 0.5, 0.5});
  }
  throw std::invalid_argument("unknown medium preset");
}

std::vector<double> MediumParams::raw() const {
  return {beta_d_raw[0], beta_d_raw[1], beta_d_raw[2], beta_b_raw[0], beta_b_raw[1],
          beta_b_raw[2], b_inf_raw[0],  b_inf_raw[1],  b_inf_raw[2]};
}

MediumParams MediumParams::from_raw(std::span<const double> r) {
  if (r.size() != 9) throw std::invalid_argument("MediumParams::from_raw: expected 9 values");
  MediumParams p;
  for (int c = 0; c < 3; ++c) {
    p.beta_d_raw[c] = r[c];
    p.beta_b_raw[c] = r[3 + c];
    p.b_inf_raw[c] = r[6 + c];
  }
  return p;
}

MediumVars MediumVars::from_raw(const ad::Var& raw9) {
  if (raw9.size() != 9) throw std::invalid_argument("MediumVars::from_raw: expected 9 values");
  return {ad::softplus(ad::slice(raw9, 0, {3})), ad::softplus(ad::slice(raw9, 3, {3})),
          ad::sigmoid(ad::slice(raw9, 6, {3}))};
}

MediumVars MediumVars::constants(const MediumParams& p) {
  const Rgb d = p.beta_d();
  const Rgb b = p.beta_b();
  const Rgb inf = p.b_inf();
  return {ad::constant({d[0], d[1], d[2]}, {3}), ad::constant({b[0], b[1], b[2]}, {3}),
          ad::constant({inf[0], inf[1], inf[2]}, {3})};
}

ad::Var attenuation(const MediumVars& m, const ad::Var& depth) {
  return ad::exp(ad::neg(ad::channel_outer(depth, m.beta_d)));
}

ad::Var backscatter(const MediumVars& m, const ad::Var& depth) {
  const ad::Var decay = ad::exp(ad::neg(ad::channel_outer(depth, m.beta_b)));
  const ad::Var veil = ad::broadcast_pixels(m.b_inf, depth.shape()[0], depth.shape()[1]);
  return ad::mul(veil, ad::add_scalar(ad::neg(decay), 1.0));
}

ad::Var compose(const ad::Var& true_color, const ad::Var& depth, const MediumVars& m) {
  return ad::add(ad::mul(true_color, attenuation(m, depth)), backscatter(m, depth));
}

ad::Var backscatter(const MediumVars& m, const ad::Var& depth, const ad::Var& coverage) {
  const ad::Var decay = ad::exp(ad::neg(ad::channel_outer(depth, m.beta_b)));
  const ad::Var covered = ad::mul(decay, ad::channel_outer(coverage, ad::constant({1.0, 1.0, 1.0}, {3})));
  const ad::Var veil = ad::broadcast_pixels(m.b_inf, depth.shape()[0], depth.shape()[1]);
  return ad::mul(veil, ad::add_scalar(ad::neg(covered), 1.0));
}

ad::Var compose(const ad::Var& true_color, const ad::Var& depth, const ad::Var& coverage, const MediumVars& m,
                Uncovered uncovered) {
  if (uncovered == Uncovered::kZeroRange) return compose(true_color, depth, m);
  return ad::add(ad::mul(true_color, attenuation(m, depth)), backscatter(m, depth, coverage));
}

namespace {

ad::Var depth_var(const ScalarMap& z) {
  std::vector<double> v(z.data().size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(z.data()[i] >= 0.0f)) throw std::invalid_argument("medium: depth must be non-negative");
    v[i] = z.data()[i];
  }
  return ad::constant(std::move(v), {z.height(), z.width()});
}

RgbImage to_image(const ad::Var& v, std::size_t w, std::size_t h) {
  return RgbImage(w, h, std::vector<double>(v.value().begin(), v.value().end()));
}

}  // namespace

RgbImage attenuation_map(const MediumParams& p, const ScalarMap& depth) {
  return to_image(attenuation(MediumVars::constants(p), depth_var(depth)), depth.width(), depth.height());
}

RgbImage backscatter_image(const MediumParams& p, const ScalarMap& depth) {
  return to_image(backscatter(MediumVars::constants(p), depth_var(depth)), depth.width(), depth.height());
}

RgbImage compose(const RgbImage& true_color, const ScalarMap& depth, const MediumParams& p) {
  if (!depth.same_size(true_color)) throw std::invalid_argument("compose: color and depth sizes differ");
  const ad::Var j = ad::constant(true_color.data(), {true_color.height(), true_color.width(), 3});
  return to_image(compose(j, depth_var(depth), MediumVars::constants(p)), depth.width(), depth.height());
}

RgbImage restore(const RgbImage& captured, const ScalarMap& depth, const MediumParams& p, RestoreOptions opts) {
  if (!depth.same_size(captured)) throw std::invalid_argument("restore: color and depth sizes differ");
  const RgbImage a = attenuation_map(p, depth);
  const RgbImage b = backscatter_image(p, depth);
  RgbImage out(captured.width(), captured.height());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    double v = (captured.data()[i] - b.data()[i]) / std::max(a.data()[i], kAttenuationFloor);
    if (opts.clamp_for_display) v = std::clamp(v, 0.0, 2.0);
    out.data()[i] = v;
  }
  return out;
}

namespace {

std::string join3(const Rgb& v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g", v[0], v[1], v[2]);
  return buf;
}

}  // namespace

void save_medium(const MediumParams& p, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "beta_d = " << join3(p.beta_d()) << "\n";
  f << "beta_b = " << join3(p.beta_b()) << "\n";
  f << "b_inf = " << join3(p.b_inf()) << "\n";
  f << "raw = " << join3(p.beta_d_raw) << ' ' << join3(p.beta_b_raw) << ' ' << join3(p.b_inf_raw) << "\n";
  if (!f) throw DataError("short write to " + path.string());
}

MediumParams load_medium(const std::filesystem::path& path) {
  const KeyValueFile kv = KeyValueFile::load(path);
  if (kv.contains("raw")) return MediumParams::from_raw(kv.get_doubles("raw", 9));
  const auto d = kv.get_doubles("beta_d", 3);
  const auto b = kv.get_doubles("beta_b", 3);
  const auto inf = kv.get_doubles("b_inf", 3);
  return MediumParams::from_activated({d[0], d[1], d[2]}, {b[0], b[1], b[2]}, {inf[0], inf[1], inf[2]});
}

}  // namespace uwsplat
