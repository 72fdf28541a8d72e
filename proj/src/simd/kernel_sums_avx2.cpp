// AVX2 + FMA variant. Compiled with -mavx2 -mfma; only reached through
// dispatch after a cpuid check.

#include <immintrin.h>

#include <cmath>

#include "variants.hpp"

namespace etsi::simd::avx2 {

namespace {

// exp(x) for x <= 0, Cephes-style: x = n ln2 + r with |r| <= ln2/2, then
// exp(r) = 1 + 2 r P(r^2) / (Q(r^2) - r P(r^2)). About 1 ulp over the
// normal range. Arguments below -708 flush to 0 (std::exp would return a
// subnormal there; the difference is below 1e-307).
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lower = _mm256_set1_pd(-708.0);

  const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lower);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, c1, x);
  r = _mm256_fnmadd_pd(n, c2, r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);

  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009e0));

  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // 2^n from the integer bits of n + 1.5 * 2^52.
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);
  const __m256i ni = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(n, magic)),
                                      _mm256_castpd_si256(magic));
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(ni, _mm256_set1_epi64x(1023)), 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, e);
}

inline __m256d gauss(__m256d x, __m256d center, __m256d inv_h) {
  const __m256d z = _mm256_mul_pd(_mm256_sub_pd(x, center), inv_h);
  const __m256d arg = _mm256_mul_pd(_mm256_mul_pd(z, z), _mm256_set1_pd(-0.5));
  return exp_nonpositive(arg);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys, double center,
                      double inv_h) {
  const std::size_t n = xs.size();
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vh = _mm256_set1_pd(inv_h);
  __m256d w0 = _mm256_setzero_pd(), w1 = _mm256_setzero_pd();
  __m256d y0 = _mm256_setzero_pd(), y1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d e0 = gauss(_mm256_loadu_pd(xs.data() + i), vc, vh);
    const __m256d e1 = gauss(_mm256_loadu_pd(xs.data() + i + 4), vc, vh);
    w0 = _mm256_add_pd(w0, e0);
    w1 = _mm256_add_pd(w1, e1);
    y0 = _mm256_fmadd_pd(e0, _mm256_loadu_pd(ys.data() + i), y0);
    y1 = _mm256_fmadd_pd(e1, _mm256_loadu_pd(ys.data() + i + 4), y1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d e0 = gauss(_mm256_loadu_pd(xs.data() + i), vc, vh);
    w0 = _mm256_add_pd(w0, e0);
    y0 = _mm256_fmadd_pd(e0, _mm256_loadu_pd(ys.data() + i), y0);
  }
  KernelSums acc{hsum(_mm256_add_pd(w0, w1)), hsum(_mm256_add_pd(y0, y1))};
  for (; i < n; ++i) {
    const double z = (xs[i] - center) * inv_h;
    const double e = std::exp(-0.5 * z * z);
    acc.weight += e;
    acc.weighted += e * ys[i];
  }
  return acc;
}

KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior,
                               std::span<const double> ys, double center, double inv_h) {
  const std::size_t n = xs.size();
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vh = _mm256_set1_pd(inv_h);
  __m256d w0 = _mm256_setzero_pd(), w1 = _mm256_setzero_pd();
  __m256d y0 = _mm256_setzero_pd(), y1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d e0 = _mm256_mul_pd(gauss(_mm256_loadu_pd(xs.data() + i), vc, vh),
                                     _mm256_loadu_pd(prior.data() + i));
    const __m256d e1 = _mm256_mul_pd(gauss(_mm256_loadu_pd(xs.data() + i + 4), vc, vh),
                                     _mm256_loadu_pd(prior.data() + i + 4));
    w0 = _mm256_add_pd(w0, e0);
    w1 = _mm256_add_pd(w1, e1);
    y0 = _mm256_fmadd_pd(e0, _mm256_loadu_pd(ys.data() + i), y0);
    y1 = _mm256_fmadd_pd(e1, _mm256_loadu_pd(ys.data() + i + 4), y1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d e0 = _mm256_mul_pd(gauss(_mm256_loadu_pd(xs.data() + i), vc, vh),
                                     _mm256_loadu_pd(prior.data() + i));
    w0 = _mm256_add_pd(w0, e0);
    y0 = _mm256_fmadd_pd(e0, _mm256_loadu_pd(ys.data() + i), y0);
  }
  KernelSums acc{hsum(_mm256_add_pd(w0, w1)), hsum(_mm256_add_pd(y0, y1))};
  for (; i < n; ++i) {
    const double z = (xs[i] - center) * inv_h;
    const double e = std::exp(-0.5 * z * z) * prior[i];
    acc.weight += e;
    acc.weighted += e * ys[i];
  }
  return acc;
}

void gauss_weights(std::span<const double> xs, double center, double inv_h,
                   std::span<double> out) {
  const std::size_t n = xs.size();
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vh = _mm256_set1_pd(inv_h);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i, gauss(_mm256_loadu_pd(xs.data() + i), vc, vh));
  }
  for (; i < n; ++i) {
    const double z = (xs[i] - center) * inv_h;
    out[i] = std::exp(-0.5 * z * z);
  }
}

}  // namespace etsi::simd::avx2
