#include "projection.hpp"

namespace uwsplat {

std::optional<ProjectedGaussian> project(const Gaussian& g, const CameraView& cam, const RenderOptions& opts) {
  detail::ScreenSplat<double> s;
  if (!detail::project_splat(g.mean.data(), g.log_scale.data(), g.rotation.data(), cam, opts, s)) return std::nullopt;
  ProjectedGaussian p;
  p.mean = Eigen::Vector2d(s.mean_x, s.mean_y);
  p.cov << s.cov_a, s.cov_b, s.cov_b, s.cov_c;
  p.depth = s.depth;
  return p;
}

}  // namespace uwsplat
