#pragma once

// Gaussian kernel reductions used by every smoother in the library.
//
// Each routine has a scalar reference implementation and, where the CPU
// supports it, a vectorized variant (AVX2+FMA on x86-64, NEON on AArch64).
// The variant is picked once at first use from the CPU features; the
// environment variable ETSI_SIMD=scalar|avx2|neon forces a choice, and
// set_backend() switches at runtime (used by the equivalence tests).
//
// All kernels work with the unnormalized Gaussian e(z) = exp(-z^2 / 2),
// z = (x - center) * inv_h. Callers that need K_h(x) = phi(x / h) / h
// multiply by inv_h / sqrt(2 pi) themselves; in Nadaraya-Watson ratios the
// constant cancels.

#include <cstddef>
#include <span>
#include <string_view>

namespace etsi::simd {

enum class Backend { scalar, avx2, neon };

struct KernelSums {
  double weight = 0.0;    // sum_i e(z_i) * prior_i
  double weighted = 0.0;  // sum_i e(z_i) * prior_i * y_i
};

/// Sums e(z_i) and e(z_i) * ys[i]. xs and ys must have equal length.
KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys,
                      double center, double inv_h);

/// As gauss_sums with an extra multiplicative weight per point; this is the
/// inner loop of product-kernel regressions.
KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior,
                               std::span<const double> ys, double center, double inv_h);

/// out[i] = e(z_i).
void gauss_weights(std::span<const double> xs, double center, double inv_h,
                   std::span<double> out);

Backend active_backend();
bool backend_available(Backend b);
/// Throws UsageError when the backend is not compiled in or not supported
/// by the running CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

// Reference implementation, bypassing dispatch. The vectorized variants are
// checked against it.
namespace scalar {
KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys, double center,
                      double inv_h);
KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior,
                               std::span<const double> ys, double center, double inv_h);
void gauss_weights(std::span<const double> xs, double center, double inv_h,
                   std::span<double> out);
}  // namespace scalar

}  // namespace etsi::simd
