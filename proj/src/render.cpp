#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "projection.hpp"
#include "uwsplat/render.hpp"
#include "uwsplat/simd.hpp"

namespace uwsplat {

CloudParams CloudParams::constants(const GaussianCloud& c) {
  c.validate();
  const std::size_t n = c.size();
  return {ad::constant(c.means, {n, 3}), ad::constant(c.log_scales, {n, 3}), ad::constant(c.rotations, {n, 4}),
          ad::constant(c.opacity_logits, {n}), ad::constant(c.colors, {n, 3})};
}

CloudParams CloudParams::parameters(const GaussianCloud& c) {
  c.validate();
  const std::size_t n = c.size();
  return {ad::parameter(c.means, {n, 3}), ad::parameter(c.log_scales, {n, 3}), ad::parameter(c.rotations, {n, 4}),
          ad::parameter(c.opacity_logits, {n}), ad::parameter(c.colors, {n, 3})};
}

RgbImage RasterImages::color_image() const { return RgbImage(width, height, color); }

ScalarMap RasterImages::depth_map() const {
  return ScalarMap(width, height, std::vector<float>(depth.begin(), depth.end()));
}

ScalarMap RasterImages::alpha_map() const {
  return ScalarMap(width, height, std::vector<float>(alpha.begin(), alpha.end()));
}

namespace {

constexpr std::size_t kGradSlots = 10;  // mean_x, mean_y, conic a/b/c, opacity, r, g, b, depth

// Per-render state shared by the forward pass and its backward closure.
struct RasterContext {
  CameraView cam;
  RenderOptions opts;
  std::size_t n = 0;
  std::size_t tiles_x = 0;
  std::size_t tiles_y = 0;

  // Indexed by Gaussian.
  std::vector<bool> visible;
  std::vector<double> mean_x, mean_y, conic_a, conic_b, conic_c, opacity, features;  // features: 4 per splat

  std::vector<std::vector<std::uint32_t>> tile_lists;  // depth-sorted Gaussian indices per tile

  // Indexed by pixel.
  std::vector<double> accum;  // 4 per pixel
  std::vector<double> transmittance;
  std::vector<std::uint32_t> consumed;
};

struct TileSoA {
  std::vector<double> mean_x, mean_y, conic_a, conic_b, conic_c, opacity, features;

  void gather(const RasterContext& ctx, const std::vector<std::uint32_t>& list) {
    const std::size_t m = list.size();
    mean_x.resize(m);
    mean_y.resize(m);
    conic_a.resize(m);
    conic_b.resize(m);
    conic_c.resize(m);
    opacity.resize(m);
    features.resize(4 * m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::uint32_t i = list[k];
      mean_x[k] = ctx.mean_x[i];
      mean_y[k] = ctx.mean_y[i];
      conic_a[k] = ctx.conic_a[i];
      conic_b[k] = ctx.conic_b[i];
      conic_c[k] = ctx.conic_c[i];
      opacity[k] = ctx.opacity[i];
      for (int f = 0; f < 4; ++f) features[4 * k + f] = ctx.features[4 * i + f];
    }
  }

  simd::SplatSpan span() const {
    return {opacity.size(), mean_x.data(), mean_y.data(), conic_a.data(), conic_b.data(),
            conic_c.data(), opacity.data(), features.data()};
  }
};

void prepare(RasterContext& ctx, const CloudParams& p) {
  const std::size_t n = ctx.n;
  const auto& cam = ctx.cam;
  ctx.visible.assign(n, false);
  ctx.mean_x.assign(n, 0.0);
  ctx.mean_y.assign(n, 0.0);
  ctx.conic_a.assign(n, 0.0);
  ctx.conic_b.assign(n, 0.0);
  ctx.conic_c.assign(n, 0.0);
  ctx.opacity.assign(n, 0.0);
  ctx.features.assign(4 * n, 0.0);

  const auto means = p.means.value();
  const auto log_scales = p.log_scales.value();
  const auto rotations = p.rotations.value();
  const auto logits = p.opacity_logits.value();
  const auto colors = p.colors.value();

  const std::size_t ts = ctx.opts.tile_size;
  ctx.tiles_x = (cam.width + ts - 1) / ts;
  ctx.tiles_y = (cam.height + ts - 1) / ts;
  ctx.tile_lists.assign(ctx.tiles_x * ctx.tiles_y, {});

  struct Bounds {
    long x0, x1, y0, y1;
  };
  std::vector<Bounds> bounds(n);
  std::vector<std::uint32_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    detail::ScreenSplat<double> s;
    if (!detail::project_splat(&means[3 * i], &log_scales[3 * i], &rotations[4 * i], cam, ctx.opts, s)) continue;
    ctx.visible[i] = true;
    ctx.mean_x[i] = s.mean_x;
    ctx.mean_y[i] = s.mean_y;
    ctx.conic_a[i] = s.conic_a;
    ctx.conic_b[i] = s.conic_b;
    ctx.conic_c[i] = s.conic_c;
    ctx.opacity[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    ctx.features[4 * i + 0] = colors[3 * i + 0];
    ctx.features[4 * i + 1] = colors[3 * i + 1];
    ctx.features[4 * i + 2] = colors[3 * i + 2];
    ctx.features[4 * i + 3] = s.depth;

    const double mid = 0.5 * (s.cov_a + s.cov_c);
    const double det = s.cov_a * s.cov_c - s.cov_b * s.cov_b;
    const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
    const double r = std::ceil(ctx.opts.cutoff_sigma * std::sqrt(lambda));
    // Pixel centers sit at integer + 0.5.
    const double fx0 = std::ceil(s.mean_x - r - 0.5);
    const double fx1 = std::floor(s.mean_x + r - 0.5);
    const double fy0 = std::ceil(s.mean_y - r - 0.5);
    const double fy1 = std::floor(s.mean_y + r - 0.5);
    const double w = static_cast<double>(cam.width);
    const double h = static_cast<double>(cam.height);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > w - 1.0 || fy0 > h - 1.0 || !std::isfinite(fx0) || !std::isfinite(fy0)) continue;
    bounds[i] = {static_cast<long>(std::max(fx0, 0.0)), static_cast<long>(std::min(fx1, w - 1.0)),
                 static_cast<long>(std::max(fy0, 0.0)), static_cast<long>(std::min(fy1, h - 1.0))};
    order.push_back(static_cast<std::uint32_t>(i));
  }

  std::stable_sort(order.begin(), order.end(),
                   [&ctx](std::uint32_t a, std::uint32_t b) { return ctx.features[4 * a + 3] < ctx.features[4 * b + 3]; });

  for (std::uint32_t i : order) {
    const Bounds& b = bounds[i];
    for (long ty = b.y0 / static_cast<long>(ts); ty <= b.y1 / static_cast<long>(ts); ++ty) {
      for (long tx = b.x0 / static_cast<long>(ts); tx <= b.x1 / static_cast<long>(ts); ++tx) {
        ctx.tile_lists[static_cast<std::size_t>(ty) * ctx.tiles_x + static_cast<std::size_t>(tx)].push_back(i);
      }
    }
  }
}

void rasterize(RasterContext& ctx) {
  const std::size_t w = ctx.cam.width;
  const std::size_t h = ctx.cam.height;
  const std::size_t ts = ctx.opts.tile_size;
  ctx.accum.assign(4 * w * h, 0.0);
  ctx.transmittance.assign(w * h, 1.0);
  ctx.consumed.assign(w * h, 0);

  const auto& k = simd::kernels();
  const simd::CompositeParams params{ctx.opts.alpha_max, ctx.opts.min_transmittance, ctx.opts.min_power};
  TileSoA soa;
  for (std::size_t ty = 0; ty < ctx.tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < ctx.tiles_x; ++tx) {
      const auto& list = ctx.tile_lists[ty * ctx.tiles_x + tx];
      if (list.empty()) continue;
      soa.gather(ctx, list);
      const auto span = soa.span();
      const std::size_t x0 = tx * ts;
      const std::size_t x1 = std::min(x0 + ts, w);
      const std::size_t y1 = std::min((ty + 1) * ts, h);
      for (std::size_t y = ty * ts; y < y1; ++y) {
        const std::size_t p = y * w + x0;
        const simd::CompositeOut out{ctx.accum.data() + 4 * p, ctx.transmittance.data() + p, ctx.consumed.data() + p};
        k.composite_row(span, static_cast<double>(x0) + 0.5, static_cast<double>(y) + 0.5, x1 - x0, params, out);
      }
    }
  }
}

using Dual = Eigen::AutoDiffScalar<Eigen::Matrix<double, 10, 1>>;

// Chains per-Gaussian screen-space gradients back to the raw parameters.
void chain_to_parameters(const RasterContext& ctx, const std::vector<double>& screen, ad::Node& self,
                         RenderTrace& trace) {
  const std::size_t n = ctx.n;
  const auto& means = self.parents[0]->value;
  const auto& log_scales = self.parents[1]->value;
  const auto& rotations = self.parents[2]->value;

  auto live = [&self](std::size_t i) { return self.parents[i]->requires_grad; };
  const bool geometry_live = live(0) || live(1) || live(2);

  for (std::size_t i = 0; i < n; ++i) {
    if (!ctx.visible[i]) continue;
    const double* g = &screen[kGradSlots * i];
    trace.screen_grad[2 * i] = g[0];
    trace.screen_grad[2 * i + 1] = g[1];

    if (live(3)) {
      const double o = ctx.opacity[i];
      self.parent_grad(3)[i] += g[5] * o * (1.0 - o);
    }
    if (live(4)) {
      auto& gc = self.parent_grad(4);
      for (int c = 0; c < 3; ++c) gc[3 * i + c] += g[6 + c];
    }
    if (!geometry_live) continue;
    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0 && g[3] == 0.0 && g[4] == 0.0 && g[9] == 0.0) continue;

    Dual mean[3], log_scale[3], quat[4];
    for (int k = 0; k < 3; ++k) {
      mean[k] = Dual(means[3 * i + k], 10, k);
      log_scale[k] = Dual(log_scales[3 * i + k], 10, 3 + k);
    }
    for (int k = 0; k < 4; ++k) quat[k] = Dual(rotations[4 * i + k], 10, 6 + k);
    detail::ScreenSplat<Dual> s;
    detail::project_splat(mean, log_scale, quat, ctx.cam, ctx.opts, s);
    const Eigen::Matrix<double, 10, 1> d = g[0] * s.mean_x.derivatives() + g[1] * s.mean_y.derivatives() +
                                           g[2] * s.conic_a.derivatives() + g[3] * s.conic_b.derivatives() +
                                           g[4] * s.conic_c.derivatives() + g[9] * s.depth.derivatives();
    if (live(0)) {
      auto& gm = self.parent_grad(0);
      for (int k = 0; k < 3; ++k) gm[3 * i + k] += d[k];
    }
    if (live(1)) {
      auto& gs = self.parent_grad(1);
      for (int k = 0; k < 3; ++k) gs[3 * i + k] += d[3 + k];
    }
    if (live(2)) {
      auto& gq = self.parent_grad(2);
      for (int k = 0; k < 4; ++k) gq[4 * i + k] += d[6 + k];
    }
  }
}

void rasterize_backward(const RasterContext& ctx, ad::Node& self, RenderTrace& trace) {
  const std::size_t w = ctx.cam.width;
  const std::size_t h = ctx.cam.height;
  const std::size_t px_count = w * h;
  const std::size_t ts = ctx.opts.tile_size;
  const double* g_color = self.grad.data();
  const double* g_depth = g_color + 3 * px_count;
  const double* g_alpha = g_depth + px_count;

  std::vector<double> screen(kGradSlots * ctx.n, 0.0);
  std::vector<double> partial;
  for (std::size_t ty = 0; ty < ctx.tiles_y; ++ty) {
    for (std::size_t tx = 0; tx < ctx.tiles_x; ++tx) {
      const auto& list = ctx.tile_lists[ty * ctx.tiles_x + tx];
      if (list.empty()) continue;
      partial.assign(kGradSlots * list.size(), 0.0);
      const std::size_t x1 = std::min((tx + 1) * ts, w);
      const std::size_t y1 = std::min((ty + 1) * ts, h);
      for (std::size_t y = ty * ts; y < y1; ++y) {
        for (std::size_t x = tx * ts; x < x1; ++x) {
          const std::size_t p = y * w + x;
          const std::uint32_t count = ctx.consumed[p];
          if (count == 0) continue;
          const double t_final = ctx.transmittance[p];
          const double acc_alpha = 1.0 - t_final;
          double up[5] = {g_color[3 * p], g_color[3 * p + 1], g_color[3 * p + 2], 0.0, g_alpha[p]};
          if (acc_alpha >= ctx.opts.depth_alpha_floor) {
            const double depth_sum = ctx.accum[4 * p + 3];
            up[3] = g_depth[p] / acc_alpha;
            up[4] -= g_depth[p] * depth_sum / (acc_alpha * acc_alpha);
          }
          if (up[0] == 0.0 && up[1] == 0.0 && up[2] == 0.0 && up[3] == 0.0 && up[4] == 0.0) continue;

          const double px = static_cast<double>(x) + 0.5;
          const double py = static_cast<double>(y) + 0.5;
          double behind[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
          double t = t_final;
          for (std::uint32_t j = count; j-- > 0;) {
            const std::uint32_t i = list[j];
            const double dx = px - ctx.mean_x[i];
            const double dy = py - ctx.mean_y[i];
            const double a = ctx.conic_a[i];
            const double b = ctx.conic_b[i];
            const double c = ctx.conic_c[i];
            const double power = -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy;
            if (power < ctx.opts.min_power) continue;
            const double gauss = std::exp(power);
            const double o = ctx.opacity[i];
            const double raw = o * gauss;
            const double alpha = raw > ctx.opts.alpha_max ? ctx.opts.alpha_max : raw;
            const double t_before = t / (1.0 - alpha);
            const double weight = alpha * t_before;
            const double* f = &ctx.features[4 * i];
            const double feat[5] = {f[0], f[1], f[2], f[3], 1.0};

            double* slot = &partial[kGradSlots * j];
            double d_alpha = 0.0;
            for (int k = 0; k < 5; ++k) {
              d_alpha += up[k] * (feat[k] * t_before - behind[k] / (1.0 - alpha));
              behind[k] += feat[k] * weight;
            }
            slot[6] += up[0] * weight;
            slot[7] += up[1] * weight;
            slot[8] += up[2] * weight;
            slot[9] += up[3] * weight;
            if (raw <= ctx.opts.alpha_max) {
              slot[5] += d_alpha * gauss;
              const double d_power = d_alpha * raw;
              slot[0] += d_power * (a * dx + b * dy);
              slot[1] += d_power * (c * dy + b * dx);
              slot[2] += d_power * (-0.5 * dx * dx);
              slot[3] += d_power * (-dx * dy);
              slot[4] += d_power * (-0.5 * dy * dy);
            }
            t = t_before;
          }
        }
      }
      // Fixed tile order keeps the reduction deterministic.
      for (std::size_t j = 0; j < list.size(); ++j) {
        double* dst = &screen[kGradSlots * list[j]];
        const double* src = &partial[kGradSlots * j];
        for (std::size_t k = 0; k < kGradSlots; ++k) dst[k] += src[k];
      }
    }
  }
  chain_to_parameters(ctx, screen, self, trace);
}

void check_cloud_shapes(const CloudParams& p) {
  const std::size_t n = p.size();
  if (p.means.size() != 3 * n || p.log_scales.size() != 3 * n || p.rotations.size() != 4 * n || p.colors.size() != 3 * n) {
    throw std::invalid_argument("render: cloud parameter buffers have inconsistent lengths");
  }
}

}  // namespace

RenderOutput render(const CloudParams& cloud, const CameraView& cam, const RenderOptions& opts) {
  cam.validate();
  check_cloud_shapes(cloud);
  if (opts.tile_size == 0) throw std::invalid_argument("render: tile size must be positive");

  auto ctx = std::make_shared<RasterContext>();
  ctx->cam = cam;
  ctx->opts = opts;
  ctx->n = cloud.size();
  prepare(*ctx, cloud);
  rasterize(*ctx);

  auto trace = std::make_shared<RenderTrace>();
  trace->gaussian_count = ctx->n;
  trace->visible = ctx->visible;
  trace->screen_grad.assign(2 * ctx->n, 0.0);

  const std::size_t w = cam.width;
  const std::size_t h = cam.height;
  const std::size_t px_count = w * h;
  std::vector<double> combined(5 * px_count, 0.0);
  for (std::size_t p = 0; p < px_count; ++p) {
    const double acc_alpha = 1.0 - ctx->transmittance[p];
    combined[3 * p] = ctx->accum[4 * p];
    combined[3 * p + 1] = ctx->accum[4 * p + 1];
    combined[3 * p + 2] = ctx->accum[4 * p + 2];
    combined[3 * px_count + p] = acc_alpha >= opts.depth_alpha_floor ? ctx->accum[4 * p + 3] / acc_alpha : 0.0;
    combined[4 * px_count + p] = acc_alpha;
  }

  ad::Var raster = ad::make_op(
      std::move(combined), {5 * px_count},
      {cloud.means, cloud.log_scales, cloud.rotations, cloud.opacity_logits, cloud.colors},
      [ctx, trace](ad::Node& self) { rasterize_backward(*ctx, self, *trace); });

  RenderOutput out;
  out.color = ad::slice(raster, 0, {h, w, 3});
  out.depth = ad::slice(raster, 3 * px_count, {h, w});
  out.alpha = ad::slice(raster, 4 * px_count, {h, w});
  out.trace = std::move(trace);
  return out;
}

RasterImages render_images(const GaussianCloud& cloud, const CameraView& cam, const RenderOptions& opts) {
  const RenderOutput out = render(CloudParams::constants(cloud), cam, opts);
  RasterImages r;
  r.width = cam.width;
  r.height = cam.height;
  r.color.assign(out.color.value().begin(), out.color.value().end());
  r.depth.assign(out.depth.value().begin(), out.depth.value().end());
  r.alpha.assign(out.alpha.value().begin(), out.alpha.value().end());
  return r;
}

}  // namespace uwsplat
