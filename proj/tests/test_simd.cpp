#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "uwsplat/simd.hpp"

using namespace uwsplat;

namespace {

std::vector<double> randoms(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("elementwise kernels agree with the scalar reference") {
  if (!simd::backend_supported(simd::Backend::kAvx2)) return;
  const auto& s = simd::kernels(simd::Backend::kScalar);
  const auto& v = simd::kernels(simd::Backend::kAvx2);
  std::mt19937_64 rng(5);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 64u, 1001u}) {
    const auto a = randoms(rng, n, -3.0, 3.0);
    const auto b = randoms(rng, n, 0.5, 2.0);
    std::vector<double> x(n), y(n);
    for (auto op : {&simd::KernelTable::add, &simd::KernelTable::sub, &simd::KernelTable::mul, &simd::KernelTable::div}) {
      (s.*op)(a.data(), b.data(), x.data(), n);
      (v.*op)(a.data(), b.data(), y.data(), n);
      CHECK(x == y);
    }
    x = b;
    y = b;
    s.mul_acc(a.data(), b.data(), x.data(), n);
    v.mul_acc(a.data(), b.data(), y.data(), n);
    CHECK(x == y);
    x = b;
    y = b;
    s.axpy(0.7, a.data(), x.data(), n);
    v.axpy(0.7, a.data(), y.data(), n);
    CHECK(x == y);
  }
}

TEST_CASE("vector exp stays within a few ulp") {
  if (!simd::backend_supported(simd::Backend::kAvx2)) return;
  const auto& v = simd::kernels(simd::Backend::kAvx2);
  std::mt19937_64 rng(6);
  auto a = randoms(rng, 4096, -60.0, 5.0);
  a.insert(a.end(), {0.0, -0.0, -700.0, -708.5, -800.0, 1e-12, -1e-12});
  std::vector<double> out(a.size());
  v.exp(a.data(), out.data(), a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ref = std::exp(a[i]);
    if (ref < 1e-300) {
      CHECK(out[i] < 1e-300);
      continue;
    }
    worst = std::max(worst, std::abs(out[i] - ref) / ref);
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("backend selection") {
  CHECK(simd::backend_supported(simd::Backend::kScalar));
  const simd::Backend before = simd::active_backend();
  simd::set_backend(simd::Backend::kScalar);
  CHECK(simd::active_backend() == simd::Backend::kScalar);
  CHECK(simd::backend_name(simd::Backend::kScalar) == "scalar");
  simd::set_backend(before);
}
