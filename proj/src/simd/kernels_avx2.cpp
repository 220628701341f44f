#include <immintrin.h>

#include "kernels.hpp"

namespace uwsplat::simd::detail {

namespace {

// exp() for 4 doubles: range reduction by ln2 and a degree-13 Taylor
// polynomial on |r| <= ln2/2. Inputs below -708 flush to 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(x, hi);
  x = _mm256_max_pd(x, lo);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(6.93147180369123816490e-01)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(n, _mm256_set1_pd(1.90821492927058770002e-10)));

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0, 1.0 / 362880.0,
      1.0 / 40320.0,      1.0 / 5040.0,      1.0 / 720.0,      1.0 / 120.0,     1.0 / 24.0,
      1.0 / 6.0,          0.5,               1.0,              1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (int i = 1; i < 14; ++i) p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kInvFact[i]));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(ni);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(e));
  return _mm256_andnot_pd(underflow, result);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void div(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] / b[i];
}

void exp(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(a + i)));
  if (i < n) {
    alignas(32) double tmp[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; i + k < n; ++k) tmp[k] = a[i + k];
    _mm256_store_pd(tmp, exp_pd(_mm256_load_pd(tmp)));
    for (std::size_t k = 0; i + k < n; ++k) out[i + k] = tmp[k];
  }
}

void mul_acc(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), prod));
  }
  for (; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void composite_row(const SplatSpan& s, double x0, double y, std::size_t n, const CompositeParams& params,
                   const CompositeOut& out) {
  const __m256d alpha_max = _mm256_set1_pd(params.alpha_max);
  const __m256d t_min = _mm256_set1_pd(params.min_transmittance);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half = _mm256_set1_pd(-0.5);
  const __m256d lane = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  const __m256d min_power = _mm256_set1_pd(params.min_power);

  std::size_t p = 0;
  for (; p + 4 <= n; p += 4) {
    const __m256d px = _mm256_add_pd(_mm256_set1_pd(x0 + static_cast<double>(p)), lane);
    __m256d t = one;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    __m256d consumed = _mm256_setzero_pd();
    __m256d active = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
    for (std::size_t j = 0; j < s.count; ++j) {
      const __m256d dx = _mm256_sub_pd(px, _mm256_set1_pd(s.mean_x[j]));
      const double dy = y - s.mean_y[j];
      const double cyy = s.conic_c[j] * dy * dy;
      const __m256d axx = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(s.conic_a[j]), dx), dx);
      const __m256d bxy = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(s.conic_b[j]), dx), _mm256_set1_pd(dy));
      const __m256d power = _mm256_sub_pd(_mm256_mul_pd(half, _mm256_add_pd(axx, _mm256_set1_pd(cyy))), bxy);
      const __m256d live = _mm256_and_pd(active, _mm256_cmp_pd(power, min_power, _CMP_GE_OQ));
      if (_mm256_movemask_pd(live) == 0) continue;
      __m256d alpha = _mm256_mul_pd(_mm256_set1_pd(s.opacity[j]), exp_pd(power));
      alpha = _mm256_min_pd(alpha, alpha_max);
      alpha = _mm256_and_pd(alpha, live);
      const __m256d w = _mm256_mul_pd(alpha, t);
      const double* f = s.features + 4 * j;
      acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_set1_pd(f[0]), w));
      acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_set1_pd(f[1]), w));
      acc2 = _mm256_add_pd(acc2, _mm256_mul_pd(_mm256_set1_pd(f[2]), w));
      acc3 = _mm256_add_pd(acc3, _mm256_mul_pd(_mm256_set1_pd(f[3]), w));
      t = _mm256_mul_pd(t, _mm256_sub_pd(one, alpha));
      consumed = _mm256_blendv_pd(consumed, _mm256_set1_pd(static_cast<double>(j + 1)), live);
      active = _mm256_and_pd(active, _mm256_cmp_pd(t, t_min, _CMP_GE_OQ));
      if (_mm256_movemask_pd(active) == 0) break;
    }
    alignas(32) double a0[4], a1[4], a2[4], a3[4], tt[4], cc[4];
    _mm256_store_pd(a0, acc0);
    _mm256_store_pd(a1, acc1);
    _mm256_store_pd(a2, acc2);
    _mm256_store_pd(a3, acc3);
    _mm256_store_pd(tt, t);
    _mm256_store_pd(cc, consumed);
    for (int k = 0; k < 4; ++k) {
      double* fo = out.features + 4 * (p + k);
      fo[0] = a0[k];
      fo[1] = a1[k];
      fo[2] = a2[k];
      fo[3] = a3[k];
      out.transmittance[p + k] = tt[k];
      out.consumed[p + k] = static_cast<std::uint32_t>(cc[k]);
    }
  }
  if (p < n) {
    const CompositeOut tail{out.features + 4 * p, out.transmittance + p, out.consumed + p};
    scalar_table().composite_row(s, x0 + static_cast<double>(p), y, n - p, params, tail);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{add, sub, mul, div, exp, mul_acc, axpy, composite_row};
  return table;
}

}  // namespace uwsplat::simd::detail
