#include <cmath>

#include "uwsplat/raster_vars.hpp"
#include "uwsplat/trainer.hpp"

namespace uwsplat {

RenderedView render_view(const GaussianCloud& cloud, const MediumParams& medium, bool medium_enabled,
                         Uncovered uncovered, const CameraView& cam, const RenderOptions& opts) {
  const RenderOutput out = render(CloudParams::constants(cloud), cam, opts);
  RenderedView v;
  v.true_color = to_rgb_image(out.color);
  v.composed = medium_enabled ? to_rgb_image(compose(out.color, out.depth, out.alpha, MediumVars::constants(medium), uncovered)) : v.true_color;
  v.depth = to_scalar_map(out.depth);
  v.alpha = to_scalar_map(out.alpha);
  return v;
}

namespace {

Rgb abs_diff(const Rgb& a, const Rgb& b) {
  return {std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])};
}

}  // namespace

EvalRecord evaluate(const GaussianCloud& cloud, const MediumParams& medium, bool medium_enabled,
                    Uncovered uncovered, const SceneDataset& ds, const std::vector<std::size_t>& frames, const RenderOptions& opts) {
  EvalRecord rec;
  double restored_sum = 0.0, depth_sum = 0.0;
  std::size_t restored_n = 0, depth_n = 0;
  for (std::size_t idx : frames) {
    const Frame& f = ds.frames.at(idx);
    const RenderedView v = render_view(cloud, medium, medium_enabled, uncovered, f.camera, opts);
    FrameMetrics m;
    m.name = f.name;
    m.psnr = psnr(v.composed, f.image);
    m.ssim = f.image.width() >= 11 && f.image.height() >= 11 ? ssim(v.composed, f.image) : NAN;
    if (f.true_color) {
      m.restored_psnr = psnr(v.true_color, *f.true_color);
      restored_sum += *m.restored_psnr;
      ++restored_n;
    }
    if (f.depth) {
      double se = 0.0;
      std::size_t count = 0;
      for (std::size_t p = 0; p < v.depth.data().size(); ++p) {
        // open water has no surface to compare against
        if (!(v.alpha.data()[p] > 0.5f) || !std::isfinite(f.depth->data()[p])) continue;
        const double d = static_cast<double>(v.depth.data()[p]) - f.depth->data()[p];
        se += d * d;
        ++count;
      }
      if (count) {
        m.depth_rmse = std::sqrt(se / static_cast<double>(count));
        depth_sum += *m.depth_rmse;
        ++depth_n;
      }
    }
    rec.mean_psnr += m.psnr;
    rec.mean_ssim += m.ssim;
    rec.frames.push_back(m);
  }
  if (!frames.empty()) {
    rec.mean_psnr /= static_cast<double>(frames.size());
    rec.mean_ssim /= static_cast<double>(frames.size());
  }
  if (restored_n) rec.mean_restored_psnr = restored_sum / static_cast<double>(restored_n);
  if (depth_n) rec.mean_depth_rmse = depth_sum / static_cast<double>(depth_n);
  if (ds.medium_truth) {
    rec.beta_d_error = abs_diff(medium.beta_d(), ds.medium_truth->beta_d());
    rec.beta_b_error = abs_diff(medium.beta_b(), ds.medium_truth->beta_b());
    rec.b_inf_error = abs_diff(medium.b_inf(), ds.medium_truth->b_inf());
  }
  return rec;
}

}  // namespace uwsplat
