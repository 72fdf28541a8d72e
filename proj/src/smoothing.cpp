#include "etsi/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "etsi/errors.hpp"
#include "etsi/normal.hpp"
#include "etsi/simd/kernel_sums.hpp"

namespace etsi {

namespace {

// Relative floor on the unnormalized kernel mass, per training point.
constexpr double kDenominatorFloor = 1e-12;

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw UsageError(std::string(what) + " contains a non-finite value");
  }
}

std::size_t argmin_distance(std::span<const double> xs, double u) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = std::abs(xs[i] - u);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

void validate(const KernelConfig& config) {
  if (!(config.h > 0.0) || !std::isfinite(config.h)) {
    throw UsageError("bandwidth must be positive and finite");
  }
}

double kernel_density(const KernelConfig& config, double x) {
  return normal_pdf(x / config.h) / config.h;
}

double interpolated_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw UsageError("quantile of an empty sample");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double bandwidth_rule_of_thumb(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("bandwidth rule needs at least two values");
  require_finite(values, "bandwidth input");
  const auto m = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / m;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (m - 1.0));

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = interpolated_quantile(sorted, 0.75) - interpolated_quantile(sorted, 0.25);

  if (sorted.front() == sorted.back()) {
    throw NumericalError("degenerate bandwidth: all values are identical");
  }
  // A zero IQR with nonzero spread (heavy ties) falls back to the SD alone.
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 1.06 * spread * std::pow(m, -0.2);
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw NumericalError("degenerate bandwidth: zero spread");
  }
  return h;
}

double bandwidth_etsi(std::span<const double> values, std::size_t n_ref) {
  if (n_ref < 1) throw UsageError("n_ref must be at least 1");
  return bandwidth_rule_of_thumb(values) * std::pow(static_cast<double>(n_ref), -0.2);
}

ConditionalMeanFit::ConditionalMeanFit(std::vector<double> xs, std::vector<double> ys,
                                       KernelConfig config)
    : xs_(std::move(xs)), ys_(std::move(ys)), config_(config) {
  if (xs_.empty()) throw UsageError("conditional mean fit needs at least one point");
  if (xs_.size() != ys_.size()) {
    throw UsageError("conditional mean fit: xs and ys differ in length");
  }
  validate(config_);
  require_finite(xs_, "xs");
  require_finite(ys_, "ys");
  const auto [xmin, xmax] = std::minmax_element(xs_.begin(), xs_.end());
  const auto [ymin, ymax] = std::minmax_element(ys_.begin(), ys_.end());
  support_ = {*xmin, *xmax};
  response_ = {*ymin, *ymax};
}

ConditionalMeanFit::ConditionalMeanFit(const ConditionalMeanFit& other)
    : xs_(other.xs_),
      ys_(other.ys_),
      config_(other.config_),
      support_(other.support_),
      response_(other.response_),
      clamps_(other.clamp_count()),
      fallbacks_(other.fallback_count()) {}

ConditionalMeanFit& ConditionalMeanFit::operator=(const ConditionalMeanFit& other) {
  if (this != &other) {
    xs_ = other.xs_;
    ys_ = other.ys_;
    config_ = other.config_;
    support_ = other.support_;
    response_ = other.response_;
    clamps_.store(other.clamp_count());
    fallbacks_.store(other.fallback_count());
  }
  return *this;
}

double ConditionalMeanFit::nearest_response(double s) const {
  const double target = xs_[argmin_distance(xs_, s)];
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (xs_[i] == target) {
      sum += ys_[i];
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double ConditionalMeanFit::predict(double s) const {
  if (!std::isfinite(s)) throw UsageError("predict: query must be finite");
  if (s < support_.min || s > support_.max) {
    s = std::clamp(s, support_.min, support_.max);
    clamps_.fetch_add(1, std::memory_order_relaxed);
  }
  const simd::KernelSums sums = simd::gauss_sums(xs_, ys_, s, 1.0 / config_.h);
  if (!(sums.weight >= kDenominatorFloor * static_cast<double>(xs_.size()))) {
    fallbacks_.fetch_add(1, std::memory_order_relaxed);
    return nearest_response(s);
  }
  return std::clamp(sums.weighted / sums.weight, response_.min, response_.max);
}

ConditionalMeanFit fit_conditional_mean(std::vector<double> xs, std::vector<double> ys,
                                        KernelConfig config) {
  return ConditionalMeanFit(std::move(xs), std::move(ys), config);
}

CdfWeights conditional_cdf_weights(std::span<const double> ws, double u,
                                   const KernelConfig& config) {
  if (ws.empty()) throw UsageError("conditional CDF weights need at least one point");
  if (!std::isfinite(u)) throw UsageError("conditional CDF weights: u must be finite");
  validate(config);
  CdfWeights out;
  out.weights.resize(ws.size());
  simd::gauss_weights(ws, u, 1.0 / config.h, out.weights);
  double total = 0.0;
  for (double w : out.weights) total += w;
  if (!(total >= kDenominatorFloor * static_cast<double>(ws.size()))) {
    std::fill(out.weights.begin(), out.weights.end(), 0.0);
    out.weights[argmin_distance(ws, u)] = 1.0;
    out.fallback = true;
    return out;
  }
  const double inv = 1.0 / total;
  for (double& w : out.weights) w *= inv;
  return out;
}

}  // namespace etsi
