#pragma once

#include <cstdint>
#include <vector>

namespace uwsplat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam step. Moments are (re)sized to the parameter count
/// on first use.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace uwsplat
