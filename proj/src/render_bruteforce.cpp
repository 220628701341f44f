#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "uwsplat/render.hpp"

namespace uwsplat {

RasterImages render_bruteforce(const GaussianCloud& cloud, const CameraView& cam, const RenderOptions& opts) {
  cam.validate();
  cloud.validate();

  struct Splat {
    std::size_t index;
    Eigen::Vector2d mean;
    Eigen::Matrix2d inv_cov;
    double depth;
    double opacity;
    Eigen::Vector3d color;
  };
  std::vector<Splat> splats;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Gaussian g = cloud.get(i);
    const auto p = project(g, cam, opts);
    if (!p) continue;
    splats.push_back({i, p->mean, p->cov.inverse(), p->depth, g.opacity(), g.color});
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });

  RasterImages out;
  out.width = cam.width;
  out.height = cam.height;
  out.color.assign(cam.width * cam.height * 3, 0.0);
  out.depth.assign(cam.width * cam.height, 0.0);
  out.alpha.assign(cam.width * cam.height, 0.0);

  for (std::size_t y = 0; y < cam.height; ++y) {
    for (std::size_t x = 0; x < cam.width; ++x) {
      const Eigen::Vector2d pixel(x + 0.5, y + 0.5);
      double transmittance = 1.0;
      double accumulated = 0.0;
      double depth_sum = 0.0;
      Eigen::Vector3d color = Eigen::Vector3d::Zero();
      for (const Splat& s : splats) {
        const Eigen::Vector2d d = pixel - s.mean;
        const double alpha = std::min(opts.alpha_max, s.opacity * std::exp(-0.5 * d.dot(s.inv_cov * d)));
        const double weight = alpha * transmittance;
        color += weight * s.color;
        depth_sum += weight * s.depth;
        accumulated += weight;
        transmittance *= 1.0 - alpha;
      }
      const std::size_t p = y * cam.width + x;
      for (int c = 0; c < 3; ++c) out.color[3 * p + c] = color[c];
      out.alpha[p] = accumulated;
      out.depth[p] = accumulated >= opts.depth_alpha_floor ? depth_sum / accumulated : 0.0;
    }
  }
  return out;
}

}  // namespace uwsplat
