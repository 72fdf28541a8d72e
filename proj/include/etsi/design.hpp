#pragma once

// Planning a future Study B from Study A alone. Repeated random splits of
// Study A stand in for (prior study, future study) pairs; the averaged
// stratum means, variances and effect shares feed a normal-approximation
// power formula with the critical value fixed at 1.96.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "etsi/pte.hpp"
#include "etsi/trial_data.hpp"

namespace etsi {

inline constexpr double kDesignCritical = 1.96;

struct GcvOptions {
  std::size_t iterations = 100;
  double holdout = 0.5;  // evaluation share of each arm
  std::uint64_t seed = 12345;
  /// Test hook: fit and evaluate on the full study, one pass.
  bool split_disabled = false;
};

struct DesignEstimates {
  double tau = 0.0;  // outside-region share of the effect
  double rho = 0.0;  // inside-region share
  // Stratum variances: 1 observed Y arm 1, 2 imputed arm 1, 3 observed Y
  // arm 0, 4 imputed arm 0. NaN when the stratum is empty in Study A.
  double s2[4] = {0.0, 0.0, 0.0, 0.0};
  double ybar_outside[2] = {0.0, 0.0};  // by arm
  double ybar_inside[2] = {0.0, 0.0};
  double delta_outside = 0.0;  // averaged effect components
  double delta_inside = 0.0;
  double delta_total = 0.0;
  double pi_a = 0.0;  // Study A fraction in the region; default pi_B
  std::size_t iterations = 0;
  std::size_t redraws = 0;
  double holdout = 0.5;
  std::uint64_t seed = 0;
};

/// Throws NumericalError when the averaged total effect is numerically zero
/// or splits keep leaving a required stratum with fewer than 2 subjects.
DesignEstimates gcv_design(const Study& study_a, const SurrogacyRegion& region,
                           const GcvOptions& options = {});

struct PowerQuery {
  double n1 = 1.0;  // per-arm sizes; real-valued so required_n round-trips
  double n0 = 1.0;
  double psi = 0.0;
  double pi_b = 0.0;
};

/// 1 - Phi(1.96 - effect / se), kept strictly inside (0, 1). psi = 0 is
/// accepted and gives 1 - Phi(1.96).
double expected_power(const DesignEstimates& est, const PowerQuery& q);

struct RequiredN {
  double n = 0.0;            // per arm
  std::size_t n_ceil = 0;
};

/// Equal arms achieving power 1 - beta.
RequiredN required_n(const DesignEstimates& est, double psi, double pi_b, double beta);

struct PowerGridRow {
  double kappa = 0.0;
  double psi = 0.0;
  std::size_t n_total = 0;
  double power = 0.0;
};

/// Odd totals give the extra subject to arm 1.
std::vector<PowerGridRow> power_grid(const Study& study_a, const PteCurve& curve,
                                     std::span<const double> kappas, std::span<const double> psis,
                                     std::span<const std::size_t> n_totals,
                                     const GcvOptions& options = {});

void write_power_grid(std::span<const PowerGridRow> rows, std::ostream& out);

}  // namespace etsi
