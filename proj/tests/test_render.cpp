#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "uwsplat/render.hpp"
#include "uwsplat/simd.hpp"

using namespace uwsplat;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Concatenated parameter vector in CloudParams order.
std::vector<double> flatten(const GaussianCloud& c) {
  std::vector<double> v;
  for (const auto* buf : {&c.means, &c.log_scales, &c.rotations, &c.opacity_logits, &c.colors})
    v.insert(v.end(), buf->begin(), buf->end());
  return v;
}

CloudParams unflatten(const ad::Var& v, std::size_t n) {
  CloudParams p;
  std::size_t off = 0;
  auto take = [&](ad::Shape s) {
    ad::Var out = ad::slice(v, off, s);
    off += ad::element_count(s);
    return out;
  };
  p.means = take({n, 3});
  p.log_scales = take({n, 3});
  p.rotations = take({n, 4});
  p.opacity_logits = take({n});
  p.colors = take({n, 3});
  return p;
}

}  // namespace

TEST_CASE("projection of a centered isotropic splat") {
  const CameraView cam = testutil::front_camera(16, 20.0);
  const auto pg = project(Gaussian::isotropic({0, 0, 2}, 0.1, 0.5, {1, 1, 1}), cam);
  REQUIRE(pg);
  CHECK(pg->mean.x() == doctest::Approx(8.0));
  CHECK(pg->mean.y() == doctest::Approx(8.0));
  CHECK(pg->depth == doctest::Approx(2.0));
  // (f sigma / z)^2 + dilation
  CHECK(pg->cov(0, 0) == doctest::Approx(1.0 + 0.3));
  CHECK(pg->cov(0, 1) == doctest::Approx(0.0));
  CHECK_FALSE(project(Gaussian::isotropic({0, 0, -1}, 0.1, 0.5, {1, 1, 1}), cam));
}

TEST_CASE("empty cloud renders transparent black with zero depth") {
  const CameraView cam = testutil::front_camera(8, 10.0);
  const RasterImages r = render_images(GaussianCloud{}, cam);
  for (double v : r.color) CHECK(v == 0.0);
  for (double v : r.depth) CHECK(v == 0.0);
  for (double v : r.alpha) CHECK(v == 0.0);
}

TEST_CASE("single opaque splat at its center") {
  const CameraView cam = testutil::front_camera(16, 20.0);
  GaussianCloud c;
  c.push_back(Gaussian::isotropic({0, 0, 2}, 0.5, 0.9, {0.2, 0.4, 0.6}));
  const RasterImages r = render_images(c, cam);
  // pixel (8, 8) center sits half a pixel from the projected mean
  const std::size_t p = 8 * 16 + 8;
  const double var = (20.0 * 0.5 / 2.0) * (20.0 * 0.5 / 2.0) + 0.3;
  const double a = 0.9 * std::exp(-0.5 * (0.25 + 0.25) / var);
  CHECK(r.alpha[p] == doctest::Approx(a).epsilon(1e-12));
  CHECK(r.color[p * 3 + 1] == doctest::Approx(0.4 * a).epsilon(1e-12));
  CHECK(r.depth[p] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("tile rasterizer matches the brute-force reference") {
  std::mt19937_64 rng(7);
  const CameraView cam = testutil::front_camera(16, 20.0);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const GaussianCloud c = testutil::random_cloud(rng, 1 + rng() % 50, 20.0, 8.0);
    const RasterImages a = render_images(c, cam);
    const RasterImages b = render_bruteforce(c, cam);
    worst = std::max({worst, max_abs_diff(a.color, b.color), max_abs_diff(a.alpha, b.alpha)});
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("scalar and vector compositing agree") {
  if (!simd::backend_supported(simd::Backend::kAvx2)) return;
  std::mt19937_64 rng(11);
  const CameraView cam = testutil::front_camera(32, 40.0);
  const simd::Backend before = simd::active_backend();
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianCloud c = testutil::random_cloud(rng, 40, 40.0, 16.0);
    simd::set_backend(simd::Backend::kScalar);
    const RasterImages a = render_images(c, cam);
    simd::set_backend(simd::Backend::kAvx2);
    const RasterImages b = render_images(c, cam);
    CHECK(max_abs_diff(a.color, b.color) < 1e-12);
    CHECK(max_abs_diff(a.alpha, b.alpha) < 1e-12);
    CHECK(max_abs_diff(a.depth, b.depth) < 1e-10);
  }
  simd::set_backend(before);
}

TEST_CASE("renderer gradients match central differences") {
  std::mt19937_64 rng(3);
  const CameraView cam = testutil::front_camera(8, 10.0);
  for (int trial = 0; trial < 4; ++trial) {
    const GaussianCloud c = testutil::random_cloud(rng, 2 + trial * 2, 10.0, 4.0);
    const std::size_t n = c.size();
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w_color(8 * 8 * 3), w_depth(64), w_alpha(64);
    for (double& x : w_color) x = u(rng);
    for (double& x : w_depth) x = u(rng);
    for (double& x : w_alpha) x = u(rng);
    auto f = [&](const ad::Var& v) {
      const RenderOutput out = render(unflatten(v, n), cam);
      return ad::add(ad::add(ad::sum(ad::mul(out.color, ad::constant(w_color, {8, 8, 3}))),
                             ad::sum(ad::mul(out.depth, ad::constant(w_depth, {8, 8})))),
                     ad::sum(ad::mul(out.alpha, ad::constant(w_alpha, {8, 8}))));
    };
    const auto r = ad::finite_diff_check(f, flatten(c));
    INFO("trial " << trial << " index " << r.worst_index << " analytic " << r.analytic[r.worst_index] << " numeric "
                  << r.numeric[r.worst_index]);
    double norm = 0.0;
    for (double g : r.analytic) norm = std::max(norm, std::abs(g));
    CHECK(norm > 1e-3);
    CHECK(r.max_error < 1e-3);
  }
}
