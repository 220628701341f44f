#include "uwsplat/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "uwsplat/raster_vars.hpp"

namespace uwsplat {

void LossConfig::validate() const {
  if (!(k_bs > 1.0)) throw std::invalid_argument("loss config: k_bs must exceed 1");
  if (!(t_sat > 0.0 && t_sat < 1.0)) throw std::invalid_argument("loss config: t_sat must lie in (0, 1)");
  if (!(t_sim >= 0.0)) throw std::invalid_argument("loss config: t_sim must be non-negative");
  if (!(lambda_dssim >= 0.0 && lambda_dssim <= 1.0))
    throw std::invalid_argument("loss config: lambda_dssim must lie in [0, 1]");
  const double w[] = {weights.gs,      weights.backscatter,  weights.grayworld,  weights.saturation,
                      weights.opacity, weights.depth_smooth, weights.depth_recon};
  for (double x : w)
    if (!(x >= 0.0)) throw std::invalid_argument("loss config: weights must be non-negative");
}

namespace {

void require_image(const ad::Var& v, const RgbImage& ref, const char* what) {
  const auto& s = v.shape();
  if (s.size() != 3 || s[2] != 3 || s[0] != ref.height() || s[1] != ref.width())
    throw std::invalid_argument(std::string(what) + ": image sizes differ");
}

void require_map(const ad::Var& v, const RgbImage& ref, const char* what) {
  const auto& s = v.shape();
  if (s.size() != 2 || s[0] != ref.height() || s[1] != ref.width())
    throw std::invalid_argument(std::string(what) + ": map size differs from image");
}

ad::Var map_constant(const ScalarMap& m) { return to_var(m); }

}  // namespace

ad::Var loss_gs(const ad::Var& rendered, const RgbImage& target, double lambda) {
  require_image(rendered, target, "loss_gs");
  const ad::Var l1 = ad::mean(ad::abs(ad::sub(rendered, to_var(target))));
  if (lambda == 0.0) return l1;
  const ad::Var dssim = ad::scale(ad::add_scalar(ad::neg(ssim_against(rendered, target)), 1.0), 0.5);
  return ad::add(ad::scale(l1, 1.0 - lambda), ad::scale(dssim, lambda));
}

ad::Var loss_backscatter(const RgbImage& captured, const ad::Var& b_hat, double k, bool literal_sign) {
  require_image(b_hat, captured, "loss_backscatter");
  const ad::Var d = ad::sub(to_var(captured), b_hat);
  const ad::Var pos = ad::max_with_const(d, 0.0);
  const ad::Var neg = ad::min_with_const(d, 0.0);
  // |min(D,0)| = -min(D,0)
  return ad::sum(ad::add(pos, ad::scale(neg, literal_sign ? k : -k)));
}

ad::Var loss_grayworld(const ad::Var& true_color) {
  return ad::mean(ad::square(ad::add_scalar(ad::channel_means(true_color), -0.5)));
}

ad::Var loss_saturation(const ad::Var& true_color, double t_sat) {
  return ad::sum(ad::max_with_const(ad::add_scalar(true_color, -t_sat), 0.0));
}

ad::Var loss_depth_weighted_recon(const RgbImage& captured, const ad::Var& composed, const ad::Var& depth) {
  require_image(composed, captured, "loss_depth_weighted_recon");
  require_map(depth, captured, "loss_depth_weighted_recon");
  const ad::Var z = ad::expand_channels(ad::detach(depth));
  return ad::sum(ad::abs(ad::mul(z, ad::sub(to_var(captured), composed))));
}

ad::Var loss_depth_smooth(const RgbImage& captured, const ad::Var& depth) {
  require_map(depth, captured, "loss_depth_smooth");
  const GradientMaps g = spatial_gradients(captured);
  const ad::Var wx = ad::exp(ad::neg(map_constant(g.gx)));
  const ad::Var wy = ad::exp(ad::neg(map_constant(g.gy)));
  return ad::add(ad::sum(ad::mul(wx, ad::abs(ad::diff_x(depth)))), ad::sum(ad::mul(wy, ad::abs(ad::diff_y(depth)))));
}

ad::Var loss_opacity_background(const RgbImage& captured, const ad::Var& alpha, const Rgb& b_inf, double t_sim) {
  require_map(alpha, captured, "loss_opacity_background");
  std::vector<double> mask(captured.pixel_count(), 0.0);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = captured.data()[p * 3 + c] - b_inf[c];
      d2 += d * d;
    }
    if (d2 < t_sim) mask[p] = 1.0;
  }
  return ad::sum(ad::mul(alpha, ad::constant(std::move(mask), alpha.shape())));
}

std::string LossBreakdown::to_string() const {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "total=%.9g gs=%.9g bs=%.9g gw=%.9g sat=%.9g op=%.9g zsmooth=%.9g zrecon=%.9g", total, gs,
                backscatter, grayworld, saturation, opacity, depth_smooth, depth_recon);
  return buf;
}

LossResult total_loss(const LossInputs& in, const LossConfig& cfg) {
  if (!in.captured) throw std::invalid_argument("total_loss: no captured image");
  const RgbImage& img = *in.captured;
  const LossWeights& w = cfg.weights;

  LossResult r;
  std::vector<ad::Var> terms;
  auto add_term = [&](double weight, double& slot, const ad::Var& term) {
    slot = term.item();
    terms.push_back(ad::scale(term, weight));
  };

  if (!in.medium_enabled) {
    r.composed = in.true_color;
    if (w.gs > 0) add_term(w.gs, r.parts.gs, loss_gs(r.composed, img, cfg.lambda_dssim));
  } else {
    r.composed = compose(in.true_color, in.depth, in.alpha, in.medium, in.uncovered);
    if (w.gs > 0) add_term(w.gs, r.parts.gs, loss_gs(r.composed, img, cfg.lambda_dssim));
    if (w.backscatter > 0) {
      const ad::Var b_hat = in.uncovered == Uncovered::kOpenWater
                                ? backscatter(in.medium, ad::detach(in.depth), ad::detach(in.alpha))
                                : backscatter(in.medium, ad::detach(in.depth));
      add_term(w.backscatter, r.parts.backscatter, loss_backscatter(img, b_hat, cfg.k_bs, cfg.literal_backscatter_sign));
    }
    if (w.grayworld > 0) add_term(w.grayworld, r.parts.grayworld, loss_grayworld(in.true_color));
    if (w.saturation > 0) add_term(w.saturation, r.parts.saturation, loss_saturation(in.true_color, cfg.t_sat));
    if (w.opacity > 0) {
      const auto v = in.medium.b_inf.value();
      add_term(w.opacity, r.parts.opacity, loss_opacity_background(img, in.alpha, {v[0], v[1], v[2]}, cfg.t_sim));
    }
    if (w.depth_smooth > 0) add_term(w.depth_smooth, r.parts.depth_smooth, loss_depth_smooth(img, in.depth));
    if (w.depth_recon > 0) {
      // Depth reaches this term only as a fixed weight, including through I_hat.
      const ad::Var z = ad::detach(in.depth);
      add_term(w.depth_recon, r.parts.depth_recon,
               loss_depth_weighted_recon(img, compose(in.true_color, z, in.alpha, in.medium, in.uncovered), z));
    }
  }

  if (terms.empty()) {
    r.total = ad::scalar(0.0);
  } else {
    r.total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) r.total = ad::add(r.total, terms[i]);
  }
  r.parts.total = r.total.item();
  return r;
}

}  // namespace uwsplat
