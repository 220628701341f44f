#include <cmath>
#include <random>

#include "doctest.h"
#include "uwsplat/autodiff.hpp"

using namespace uwsplat;

namespace {

std::vector<double> randoms(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("product rule on a tiny graph") {
  ad::Var x = ad::parameter({3.0}, {1});
  ad::Var y = ad::parameter({4.0}, {1});
  ad::Var f = ad::add(ad::mul(x, y), ad::square(x));  // xy + x^2
  ad::backward(f);
  CHECK(f.item() == 21.0);
  CHECK(x.grad()[0] == 10.0);
  CHECK(y.grad()[0] == 3.0);

  // leaves accumulate until cleared
  ad::backward(f);
  CHECK(x.grad()[0] == 20.0);
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("shared subexpressions sum their contributions") {
  ad::Var x = ad::parameter({2.0}, {1});
  ad::Var e = ad::exp(x);
  ad::Var f = ad::mul(e, e);
  ad::backward(f);
  CHECK(x.grad()[0] == doctest::Approx(2.0 * std::exp(4.0)));
}

TEST_CASE("detach and constants cut the gradient path") {
  ad::Var x = ad::parameter({1.5, -2.0}, {2});
  ad::Var f = ad::sum(ad::mul(ad::detach(x), x));
  ad::backward(f);
  CHECK(x.grad() == std::vector<double>{1.5, -2.0});
  ad::Var c = ad::constant({1.0}, {1});
  CHECK_FALSE(c.requires_grad());
  CHECK_FALSE(ad::add(c, c).requires_grad());
}

TEST_CASE("kinks take the zero subgradient") {
  ad::Var x = ad::parameter({0.0, 0.5, -0.5}, {3});
  ad::backward(ad::sum(ad::add(ad::abs(x), ad::max_with_const(x, 0.0))));
  CHECK(x.grad() == std::vector<double>{0.0, 2.0, -1.0});
}

TEST_CASE("broadcast rules") {
  ad::Var a = ad::parameter({1, 2, 3}, {3});
  ad::Var s = ad::parameter({2}, {1});
  ad::backward(ad::sum(ad::mul(a, s)));
  CHECK(s.grad()[0] == 6.0);
  CHECK(a.grad() == std::vector<double>{2, 2, 2});
  CHECK_THROWS_AS(ad::add(a, ad::constant({1, 2}, {2})), std::invalid_argument);
  CHECK_THROWS_AS(ad::backward(a), std::invalid_argument);
}

TEST_CASE("every primitive passes a finite-difference check") {
  std::mt19937_64 rng(9);
  const std::size_t h = 3, w = 4;
  const auto x0 = randoms(rng, h * w * 3, 0.2, 1.5);
  const auto other = ad::constant(randoms(rng, h * w * 3, 0.5, 1.5), {h, w, 3});
  const auto weights = ad::constant(randoms(rng, h * w * 3, -1.0, 1.0), {h, w, 3});
  const auto wmap = ad::constant(randoms(rng, h * w, -1.0, 1.0), {h, w});
  const auto coeffs = ad::constant({0.3, -0.7, 1.1}, {3});

  using Fn = std::function<ad::Var(const ad::Var&)>;
  auto img = [&](const ad::Var& v) { return ad::reshape(v, {h, w, 3}); };
  auto map = [&](const ad::Var& v) { return ad::slice(v, 5, {h, w}); };
  auto wsum = [&](const ad::Var& v) { return ad::sum(ad::mul(v, weights)); };
  auto wsum_map = [&](const ad::Var& v) { return ad::sum(ad::mul(v, wmap)); };

  const std::vector<std::pair<const char*, Fn>> cases = {
      {"add", [&](const ad::Var& v) { return wsum(ad::add(img(v), other)); }},
      {"sub", [&](const ad::Var& v) { return wsum(ad::sub(other, img(v))); }},
      {"mul", [&](const ad::Var& v) { return wsum(ad::mul(img(v), img(v))); }},
      {"div", [&](const ad::Var& v) { return wsum(ad::div(other, img(v))); }},
      {"exp", [&](const ad::Var& v) { return wsum(ad::exp(img(v))); }},
      {"abs", [&](const ad::Var& v) { return wsum(ad::abs(ad::add_scalar(img(v), -0.85))); }},
      {"softplus", [&](const ad::Var& v) { return wsum(ad::softplus(img(v))); }},
      {"sigmoid", [&](const ad::Var& v) { return wsum(ad::sigmoid(img(v))); }},
      {"scale", [&](const ad::Var& v) { return wsum(ad::scale(ad::neg(img(v)), 2.5)); }},
      {"mean", [&](const ad::Var& v) { return ad::mean(ad::square(v)); }},
      {"channel_outer", [&](const ad::Var& v) { return wsum(ad::channel_outer(map(v), ad::slice(v, 0, {3}))); }},
      {"channel_outer_const", [&](const ad::Var& v) { return wsum(ad::channel_outer(map(v), coeffs)); }},
      {"expand_channels", [&](const ad::Var& v) { return wsum(ad::expand_channels(map(v))); }},
      {"broadcast_pixels", [&](const ad::Var& v) { return wsum(ad::broadcast_pixels(ad::slice(v, 2, {3}), h, w)); }},
      {"channel_means", [&](const ad::Var& v) { return ad::sum(ad::mul(ad::channel_means(img(v)), coeffs)); }},
      {"diff_x", [&](const ad::Var& v) { return wsum_map(ad::diff_x(map(v))); }},
      {"diff_y", [&](const ad::Var& v) { return wsum_map(ad::diff_y(map(v))); }},
  };
  for (const auto& [name, f] : cases) {
    const auto r = ad::finite_diff_check(f, x0);
    INFO(name << " worst " << r.worst_index);
    CHECK(r.max_error < 1e-6);
  }
}
