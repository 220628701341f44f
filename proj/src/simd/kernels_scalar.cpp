#include <cmath>

#include "kernels.hpp"

namespace uwsplat::simd::detail {

namespace {

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void div(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}
void exp(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}
void mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void composite_row(const SplatSpan& s, double x0, double y, std::size_t n, const CompositeParams& params,
                   const CompositeOut& out) {
  for (std::size_t p = 0; p < n; ++p) {
    const double px = x0 + static_cast<double>(p);
    double t = 1.0;
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::uint32_t consumed = 0;
    for (std::size_t j = 0; j < s.count; ++j) {
      const double dx = px - s.mean_x[j];
      const double dy = y - s.mean_y[j];
      const double power = -0.5 * (s.conic_a[j] * dx * dx + s.conic_c[j] * dy * dy) - s.conic_b[j] * dx * dy;
      if (power < params.min_power) continue;
      double alpha = s.opacity[j] * std::exp(power);
      if (alpha > params.alpha_max) alpha = params.alpha_max;
      const double w = alpha * t;
      const double* f = s.features + 4 * j;
      acc[0] += f[0] * w;
      acc[1] += f[1] * w;
      acc[2] += f[2] * w;
      acc[3] += f[3] * w;
      t = t * (1.0 - alpha);
      consumed = static_cast<std::uint32_t>(j + 1);
      if (t < params.min_transmittance) break;
    }
    for (int k = 0; k < 4; ++k) out.features[4 * p + k] = acc[k];
    out.transmittance[p] = t;
    out.consumed[p] = consumed;
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{add, sub, mul, div, exp, mul_acc, axpy, composite_row};
  return table;
}

}  // namespace uwsplat::simd::detail
