#pragma once

// Vectorized variants; each is compiled only on its architecture and only
// called through dispatch.

#include "etsi/simd/kernel_sums.hpp"

#define ETSI_DECLARE_KERNEL_VARIANT(ns)                                                   \
  namespace etsi::simd::ns {                                                              \
  KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys,           \
                        double center, double inv_h);                                     \
  KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior, \
                                 std::span<const double> ys, double center, double inv_h); \
  void gauss_weights(std::span<const double> xs, double center, double inv_h,             \
                     std::span<double> out);                                              \
  }

#if defined(ETSI_HAVE_AVX2)
ETSI_DECLARE_KERNEL_VARIANT(avx2)
#endif
#if defined(ETSI_HAVE_NEON)
ETSI_DECLARE_KERNEL_VARIANT(neon)
#endif
