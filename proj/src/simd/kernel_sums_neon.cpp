// AArch64 NEON variant (two doubles per register). Same exp scheme as the
// AVX2 file.

#include <arm_neon.h>

#include <cmath>

#include "variants.hpp"

namespace etsi::simd::neon {

namespace {

inline float64x2_t exp_nonpositive(float64x2_t x) {
  const float64x2_t lower = vdupq_n_f64(-708.0);
  const uint64x2_t underflow = vcltq_f64(x, lower);
  x = vmaxq_f64(x, lower);

  const float64x2_t n = vrndnq_f64(vmulq_n_f64(x, 1.4426950408889634074));
  float64x2_t r = vfmsq_f64(x, n, vdupq_n_f64(6.93145751953125e-1));
  r = vfmsq_f64(r, n, vdupq_n_f64(1.42860682030941723212e-6));
  const float64x2_t rr = vmulq_f64(r, r);

  float64x2_t p = vdupq_n_f64(1.26177193074810590878e-4);
  p = vfmaq_f64(vdupq_n_f64(3.02994407707441961300e-2), p, rr);
  p = vfmaq_f64(vdupq_n_f64(9.99999999999999999910e-1), p, rr);
  p = vmulq_f64(p, r);

  float64x2_t q = vdupq_n_f64(3.00198505138664455042e-6);
  q = vfmaq_f64(vdupq_n_f64(2.52448340349684104192e-3), q, rr);
  q = vfmaq_f64(vdupq_n_f64(2.27265548208155028766e-1), q, rr);
  q = vfmaq_f64(vdupq_n_f64(2.00000000000000000009e0), q, rr);

  float64x2_t e = vdivq_f64(p, vsubq_f64(q, p));
  e = vfmaq_f64(vdupq_n_f64(1.0), e, vdupq_n_f64(2.0));

  const int64x2_t ni = vcvtq_s64_f64(n);
  const int64x2_t bits = vshlq_n_s64(vaddq_s64(ni, vdupq_n_s64(1023)), 52);
  e = vmulq_f64(e, vreinterpretq_f64_s64(bits));
  return vreinterpretq_f64_u64(vbicq_u64(vreinterpretq_u64_f64(e), underflow));
}

inline float64x2_t gauss(float64x2_t x, float64x2_t center, float64x2_t inv_h) {
  const float64x2_t z = vmulq_f64(vsubq_f64(x, center), inv_h);
  return exp_nonpositive(vmulq_n_f64(vmulq_f64(z, z), -0.5));
}

}  // namespace

KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys, double center,
                      double inv_h) {
  const std::size_t n = xs.size();
  const float64x2_t vc = vdupq_n_f64(center);
  const float64x2_t vh = vdupq_n_f64(inv_h);
  float64x2_t w = vdupq_n_f64(0.0), y = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t e = gauss(vld1q_f64(xs.data() + i), vc, vh);
    w = vaddq_f64(w, e);
    y = vfmaq_f64(y, e, vld1q_f64(ys.data() + i));
  }
  KernelSums acc{vaddvq_f64(w), vaddvq_f64(y)};
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
  const float64x2_t vc = vdupq_n_f64(center);
  const float64x2_t vh = vdupq_n_f64(inv_h);
  float64x2_t w = vdupq_n_f64(0.0), y = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t e =
        vmulq_f64(gauss(vld1q_f64(xs.data() + i), vc, vh), vld1q_f64(prior.data() + i));
    w = vaddq_f64(w, e);
    y = vfmaq_f64(y, e, vld1q_f64(ys.data() + i));
  }
  KernelSums acc{vaddvq_f64(w), vaddvq_f64(y)};
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
  const float64x2_t vc = vdupq_n_f64(center);
  const float64x2_t vh = vdupq_n_f64(inv_h);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out.data() + i, gauss(vld1q_f64(xs.data() + i), vc, vh));
  }
  for (; i < n; ++i) {
    const double z = (xs[i] - center) * inv_h;
    out[i] = std::exp(-0.5 * z * z);
  }
}

}  // namespace etsi::simd::neon
