#pragma once

// Synthetic trials with known surrogate structure and a Monte Carlo driver.
//
//   Setting 1  W ~ U(0,10). S1 ~ Gamma(2.55, scale 2.55), S0 ~ Gamma(2.4,
//              scale 2.4). W < 5: Y1 = 2.8 + e, Y0 = 1 + e (S useless);
//              W >= 5: Y1 = 2.9 S + e, Y0 = 2.8 S + e. e ~ N(0, 1).
//   Setting 2  Same W and S, e ~ N(0, 9), four bands of W with increasing
//              surrogate strength.
//   Setting 3  W ~ U(0,12), S ~ N(2, 9), Y = 2S + W + N(0, 36) in both arms
//              (no treatment effect).
//
// Study A is drawn once per run; every iteration draws a fresh Study B from
// its own stream, so results do not depend on the number of workers.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "etsi/design.hpp"
#include "etsi/pte.hpp"
#include "etsi/rng.hpp"
#include "etsi/trial_data.hpp"

namespace etsi {

struct SettingSpec {
  int id = 1;
  std::size_t n_a1 = 1000;
  std::size_t n_a0 = 1100;
  std::size_t n_b1 = 500;
  std::size_t n_b0 = 400;
  std::size_t iterations = 1000;
  std::vector<double> kappas{0.5, 0.6, 0.7};
  std::uint64_t seed = 12345;
  double alpha = 0.05;
  PteOptions pte;
  std::size_t gcv_iterations = 100;
  double holdout = 0.5;
};

/// Throws UsageError on an unknown setting, sizes below 10, no iterations
/// or kappas outside (0, 1).
void validate(const SettingSpec& spec);

/// Fully observed role-A study, arm 1 subjects first.
Study generate_study(int setting, std::size_t n1, std::size_t n0, Philox4x32& rng);

/// delta = region membership; delta = 1 keeps S only, delta = 0 keeps Y only.
Study mask_study_b(const Study& full, const SurrogacyRegion& region);

/// Closed-form treatment effect on Y.
double true_delta_b(int setting);

/// Closed-form R_S(w); NaN in Setting 3 where the effect is zero.
double true_pte(int setting, double w);

/// Covariate values where R_S(w) jumps.
std::vector<double> pte_breaks(int setting);

/// Covariate support (lower, upper).
Range covariate_support(int setting);

/// P(W in region) under the generating covariate law.
double true_pi_b(int setting, const SurrogacyRegion& region);

struct EstimatorSummary {
  std::string estimator;  // delta_b, delta_ab, delta_p
  std::optional<double> kappa;
  double mean_estimate = 0.0;
  double ese = 0.0;       // NaN with a single iteration
  double ase = 0.0;
  double effect_size = 0.0;
  double rejection_rate = 0.0;
  std::optional<double> pi_b_true;
  /// Iterations left out because the variance was undefined (a weighted
  /// stratum with one subject). Only pooled rows can have any.
  std::size_t undefined = 0;
};

struct SimulationReport {
  int setting = 1;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  std::optional<Study> study_a;  // always set by run_simulation
  PteCurve curve;
  std::vector<SurrogacyRegion> regions;  // parallel to SettingSpec::kappas
  std::vector<EstimatorSummary> rows;    // delta_b, delta_ab, then delta_p per kappa

  const EstimatorSummary& row(const std::string& estimator,
                              std::optional<double> kappa = std::nullopt) const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

SimulationReport run_simulation(const SettingSpec& spec, const ProgressFn& progress = {});

struct DesignCheckRow {
  int setting = 1;
  double kappa = 0.0;
  double estimated_power = 0.0;
  double empirical_power = 0.0;
};

/// Estimated power from the design module on the report's Study A, with psi
/// defaulting to the closed-form effect, next to the empirical rejection
/// rate of the pooled test.
std::vector<DesignCheckRow> run_design_check(const SettingSpec& spec,
                                             const SimulationReport& report,
                                             std::optional<double> psi = std::nullopt);

void write_simulation_report(const SimulationReport& report, std::ostream& out);
void write_design_check(const std::vector<DesignCheckRow>& rows, std::ostream& out);

}  // namespace etsi
