#include <algorithm>
#include <cmath>

#include "uwsplat/errors.hpp"
#include "uwsplat/trainer.hpp"

namespace uwsplat {

namespace {

// Rebuilds one per-splat moment buffer; -1 sources start from zero.
void remap(AdamState& s, const std::vector<long>& src, std::size_t dim) {
  if (s.m.empty()) return;
  AdamState out;
  out.step = s.step;
  out.resize(src.size() * dim);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] < 0) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      out.m[i * dim + k] = s.m[src[i] * dim + k];
      out.v[i * dim + k] = s.v[src[i] * dim + k];
    }
  }
  s = std::move(out);
}

}  // namespace

void densify_and_prune(TrainState& state, const TrainConfig& cfg, double extent) {
  const GaussianCloud& old = state.cloud;
  const std::size_t n = old.size();
  const double scale_limit = cfg.percent_dense * extent;
  std::normal_distribution<double> normal(0.0, 1.0);

  GaussianCloud next;
  std::vector<long> src;
  std::vector<Gaussian> added;

  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian g = old.get(i);
    const double grad = state.stats.count[i] ? state.stats.grad_accum[i] / state.stats.count[i] : 0.0;
    const bool room = n + added.size() < cfg.max_gaussians;
    if (grad > cfg.densify_grad_threshold && room) {
      if (g.scale().maxCoeff() <= scale_limit) {
        added.push_back(g);
      } else {
        // replace by two smaller samples drawn from the splat itself
        const Eigen::Vector4d q = g.rotation.normalized();
        const Eigen::Matrix3d r = quaternion_to_matrix(q[0], q[1], q[2], q[3]);
        for (int k = 0; k < 2; ++k) {
          Gaussian child = g;
          const Eigen::Vector3d z(normal(state.rng), normal(state.rng), normal(state.rng));
          child.mean = g.mean + r * (g.scale().array() * z.array()).matrix();
          child.log_scale = g.log_scale.array() - std::log(1.6);
          added.push_back(child);
        }
        continue;
      }
    }
    if (g.opacity() < cfg.prune_opacity_threshold) continue;
    next.push_back(g);
    src.push_back(static_cast<long>(i));
  }
  for (const Gaussian& g : added) {
    if (g.opacity() < cfg.prune_opacity_threshold) continue;
    next.push_back(g);
    src.push_back(-1);
  }
  if (next.empty()) throw NumericError("densify_and_prune: every Gaussian would be removed");

  state.cloud = std::move(next);
  remap(state.adam_means, src, 3);
  remap(state.adam_scales, src, 3);
  remap(state.adam_rotations, src, 4);
  remap(state.adam_opacity, src, 1);
  remap(state.adam_colors, src, 3);
  state.stats.resize(state.cloud.size());
}

}  // namespace uwsplat
