#include "ssim_core.hpp"

#include <array>
#include <cmath>

namespace uwsplat::detail {

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable correlation: (h x w) -> (h-10 x w-10).
void filter_valid(const std::vector<double>& in, std::size_t w, std::size_t h, std::vector<double>& out) {
  static const auto g = gaussian_taps();
  const std::size_t ow = w - kSsimWindow + 1;
  const std::size_t oh = h - kSsimWindow + 1;
  std::vector<double> tmp(h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    const double* row = in.data() + y * w;
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * row[x + k];
      tmp[y * ow + x] = s;
    }
  }
  out.assign(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * tmp[(y + k) * ow + x];
      out[y * ow + x] = s;
    }
  }
}

// Adjoint of filter_valid: (h-10 x w-10) -> (h x w).
void filter_valid_adjoint(const std::vector<double>& in, std::size_t w, std::size_t h, std::vector<double>& out) {
  static const auto g = gaussian_taps();
  const std::size_t ow = w - kSsimWindow + 1;
  const std::size_t oh = h - kSsimWindow + 1;
  std::vector<double> tmp(h * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (int k = 0; k < kSsimWindow; ++k) {
      const double gk = g[k];
      double* dst = tmp.data() + (y + k) * ow;
      const double* src = in.data() + y * ow;
      for (std::size_t x = 0; x < ow; ++x) dst[x] += gk * src[x];
    }
  }
  out.assign(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const double v = tmp[y * ow + x];
      double* dst = out.data() + y * w + x;
      for (int k = 0; k < kSsimWindow; ++k) dst[k] += g[k] * v;
    }
  }
}

}  // namespace

double ssim_interleaved(std::span<const double> a, std::span<const double> b, std::size_t width,
                        std::size_t height, std::vector<double>* grad_a) {
  constexpr double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  constexpr double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const std::size_t n = width * height;
  const std::size_t ow = width - kSsimWindow + 1;
  const std::size_t oh = height - kSsimWindow + 1;
  const std::size_t windows = ow * oh;
  const double norm = 1.0 / static_cast<double>(windows * 3);

  if (grad_a) grad_a->assign(n * 3, 0.0);

  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  std::vector<double> mu_x, mu_y, s_xx, s_yy, s_xy;
  std::vector<double> d_mu, d_var, d_cov, back;
  double total = 0.0;

  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a[i * 3 + c];
      y[i] = b[i * 3 + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    filter_valid(x, width, height, mu_x);
    filter_valid(y, width, height, mu_y);
    filter_valid(xx, width, height, s_xx);
    filter_valid(yy, width, height, s_yy);
    filter_valid(xy, width, height, s_xy);

    if (grad_a) {
      d_mu.assign(windows, 0.0);
      d_var.assign(windows, 0.0);
      d_cov.assign(windows, 0.0);
    }
    double channel_sum = 0.0;
    for (std::size_t p = 0; p < windows; ++p) {
      const double mx = mu_x[p];
      const double my = mu_y[p];
      const double vx = s_xx[p] - mx * mx;
      const double vy = s_yy[p] - my * my;
      const double cov = s_xy[p] - mx * my;
      const double l_num = 2.0 * mx * my + c1;
      const double l_den = mx * mx + my * my + c1;
      const double c_num = 2.0 * cov + c2;
      const double c_den = vx + vy + c2;
      channel_sum += (l_num * c_num) / (l_den * c_den);
      if (grad_a) {
        // Partials of S with the mean, variance and covariance of x treated
        // as independent inputs.
        const double dm = (2.0 * my * c_num) / (l_den * c_den) -
                          (l_num * c_num * 2.0 * mx) / (l_den * l_den * c_den);
        const double dv = -(l_num * c_num) / (l_den * c_den * c_den);
        const double dc = (2.0 * l_num) / (l_den * c_den);
        d_var[p] = dv * norm;
        d_cov[p] = dc * norm;
        d_mu[p] = dm * norm - 2.0 * d_var[p] * mx - d_cov[p] * my;
      }
    }
    total += channel_sum;

    if (grad_a) {
      filter_valid_adjoint(d_mu, width, height, back);
      for (std::size_t i = 0; i < n; ++i) (*grad_a)[i * 3 + c] += back[i];
      filter_valid_adjoint(d_var, width, height, back);
      for (std::size_t i = 0; i < n; ++i) (*grad_a)[i * 3 + c] += 2.0 * x[i] * back[i];
      filter_valid_adjoint(d_cov, width, height, back);
      for (std::size_t i = 0; i < n; ++i) (*grad_a)[i * 3 + c] += y[i] * back[i];
    }
  }
  return total / static_cast<double>(windows * 3);
}

}  // namespace uwsplat::detail
