#pragma once

// Kernel smoothing primitives: Gaussian kernel, rule-of-thumb bandwidths,
// Nadaraya-Watson conditional means, and kernel-weighted conditional CDF
// weights.

#include <atomic>
#include <cstddef>
#include <span>
#include <vector>

#include "etsi/trial_data.hpp"

namespace etsi {

enum class Kernel { gaussian };

struct KernelConfig {
  Kernel kernel = Kernel::gaussian;
  double h = 1.0;  // bandwidth, > 0 and finite
};

/// Throws UsageError unless h is positive and finite.
void validate(const KernelConfig& config);

/// K_h(x) = phi(x / h) / h.
double kernel_density(const KernelConfig& config, double x);

/// Linear-interpolation quantile of sorted data, order-statistic index
/// p * (m - 1) (zero based).
double interpolated_quantile(std::span<const double> sorted, double p);

/// 1.06 * min(sd, IQR / 1.34) * m^(-1/5). Throws NumericalError when the
/// spread is zero and UsageError for fewer than two values.
double bandwidth_rule_of_thumb(std::span<const double> values);

/// Rule of thumb times n_ref^(-1/5); the extra factor undersmooths relative
/// to the MSE-optimal rate.
double bandwidth_etsi(std::span<const double> values, std::size_t n_ref);

/// Nadaraya-Watson fit of ys on xs. Queries outside [min xs, max xs] are
/// clamped to the nearest endpoint. When the kernel mass at the query falls
/// below 1e-12 * m (unnormalized, so a point at distance 0 counts 1) the prediction falls back to the response at the
/// nearest training abscissa (averaged over ties). Both events are tallied;
/// the tallies are atomic so one fit can serve concurrent predictions.
class ConditionalMeanFit {
public:
  ConditionalMeanFit(std::vector<double> xs, std::vector<double> ys, KernelConfig config);
  ConditionalMeanFit(const ConditionalMeanFit& other);
  ConditionalMeanFit& operator=(const ConditionalMeanFit& other);

  double predict(double s) const;

  std::span<const double> xs() const { return xs_; }
  std::span<const double> ys() const { return ys_; }
  const KernelConfig& config() const { return config_; }
  Range support() const { return support_; }
  std::size_t size() const { return xs_.size(); }

  std::size_t clamp_count() const { return clamps_.load(std::memory_order_relaxed); }
  std::size_t fallback_count() const { return fallbacks_.load(std::memory_order_relaxed); }

private:
  double nearest_response(double s) const;

  std::vector<double> xs_;
  std::vector<double> ys_;
  KernelConfig config_;
  Range support_;
  Range response_;
  mutable std::atomic<std::size_t> clamps_{0};
  mutable std::atomic<std::size_t> fallbacks_{0};
};

ConditionalMeanFit fit_conditional_mean(std::vector<double> xs, std::vector<double> ys,
                                        KernelConfig config);

struct CdfWeights {
  std::vector<double> weights;  // sums to 1
  bool fallback = false;        // nearest-neighbour point mass was used
};

/// Normalized kernel weights K_h(ws_i - u) / sum_j K_h(ws_j - u).
CdfWeights conditional_cdf_weights(std::span<const double> ws, double u,
                                   const KernelConfig& config);

}  // namespace etsi
