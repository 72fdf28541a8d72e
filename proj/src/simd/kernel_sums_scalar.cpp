#include <cmath>

#include "etsi/simd/kernel_sums.hpp"

namespace etsi::simd::scalar {

KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys, double center,
                      double inv_h) {
  KernelSums acc;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = (xs[i] - center) * inv_h;
    const double e = std::exp(-0.5 * z * z);
    acc.weight += e;
    acc.weighted += e * ys[i];
  }
  return acc;
}

KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior,
                               std::span<const double> ys, double center, double inv_h) {
  KernelSums acc;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = (xs[i] - center) * inv_h;
    const double e = std::exp(-0.5 * z * z) * prior[i];
    acc.weight += e;
    acc.weighted += e * ys[i];
  }
  return acc;
}

void gauss_weights(std::span<const double> xs, double center, double inv_h,
                   std::span<double> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = (xs[i] - center) * inv_h;
    out[i] = std::exp(-0.5 * z * z);
  }
}

}  // namespace etsi::simd::scalar
