#include "uwsplat/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace uwsplat {

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& s, double lr,
               const AdamConfig& cfg) {
  if (grad.size() != params.size()) throw std::invalid_argument("adam_step: gradient size mismatch");
  if (s.m.size() != params.size()) s.resize(params.size());
  ++s.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
    s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    params[i] -= lr * (s.m[i] / bc1) / (std::sqrt(s.v[i] / bc2) + cfg.eps);
  }
}

}  // namespace uwsplat
