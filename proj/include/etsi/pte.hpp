#pragma once

// Heterogeneous proportion of treatment effect explained, R_S(w), from a
// fully observed Study A, and the strong-surrogacy region built from it.
//
// For a grid point u:
//   m_g(u)      NW mean of Y on W in arm g
//   F(s | u)    kernel weights over the arm-0 W values
//   mu_1(s, u)  product-kernel NW mean of Y on (S, W) in arm 1
//   m_10(u)     sum_i F_i(u) mu_1(S0_i, u)
//   Delta^K = m_1 - m_0, Delta_S^K = m_10 - m_0, R_S = 1 - Delta_S^K / Delta^K

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "etsi/smoothing.hpp"
#include "etsi/trial_data.hpp"

namespace etsi {

enum class PteBandwidthRule {
  rule_of_thumb,  // default; see README "Bandwidths"
  etsi,           // additionally scaled by n0^(-1/5)
};

struct PteOptions {
  std::size_t grid_size = 100;
  std::optional<double> bandwidth_override;            // W direction
  std::optional<double> surrogate_bandwidth_override;  // S direction of mu_1
  PteBandwidthRule rule = PteBandwidthRule::rule_of_thumb;
};

struct PteBandwidths {
  double w = 0.0;
  double s = 0.0;
};

struct PteCurve {
  std::vector<double> grid;
  std::vector<double> delta_k;
  std::vector<double> delta_s_k;
  std::vector<double> r_s;     // NaN where undefined
  std::vector<bool> defined;
  PteBandwidths bandwidths;
  double epsilon = 0.0;        // |Delta^K| below this leaves R_S undefined

  std::size_t size() const { return grid.size(); }
  std::size_t defined_count() const;
};

/// Bandwidths estimate_pte would use for this study.
PteBandwidths pte_bandwidths(const Study& study_a, const PteOptions& options = {});

/// Requires a role-A study with at least 10 subjects per arm.
PteCurve estimate_pte(const Study& study_a, const PteOptions& options = {});

/// Every intermediate of one grid point, for tests and diagnostics.
struct PtePointDetail {
  double u = 0.0;
  double m1 = 0.0;
  double m0 = 0.0;
  double m10 = 0.0;
  std::vector<double> cdf_weights;  // over arm-0 subjects, study order
  std::vector<double> mu1;          // mu_1(S0_i, u), same order
  bool cdf_fallback = false;
  std::size_t mu1_fallbacks = 0;
};

PtePointDetail pte_point_detail(const Study& study_a, double u, PteBandwidths h);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Union of closed covariate intervals where R_S exceeds kappa.
class SurrogacyRegion {
public:
  SurrogacyRegion() = default;
  SurrogacyRegion(double kappa, std::vector<Interval> intervals, Range grid_range);

  /// Region covering the whole range, or nothing; mostly for tests.
  static SurrogacyRegion full(Range grid_range, double kappa = 0.5);
  static SurrogacyRegion none(Range grid_range, double kappa = 0.5);

  double kappa() const { return kappa_; }
  std::span<const Interval> intervals() const { return intervals_; }
  Range grid_range() const { return grid_range_; }
  bool empty() const { return intervals_.empty(); }

  /// Total length of the intervals.
  double measure() const;

  /// Throws UsageError for non-finite w. False outside the grid range.
  bool contains(double w) const;

private:
  double kappa_ = 0.5;
  std::vector<Interval> intervals_;
  Range grid_range_;
};

/// Maximal runs of grid points with defined R_S > kappa. Interior run ends
/// sit at the midpoint to the excluded neighbour; runs touching the grid
/// edge end at the edge. Throws UsageError unless 0 < kappa < 1.
SurrogacyRegion build_region(const PteCurve& curve, double kappa);

inline bool membership(const SurrogacyRegion& region, double w) { return region.contains(w); }

/// CSV `w,delta_k,delta_s_k,r_s,defined`; undefined r_s is written as NA.
void write_curve(const PteCurve& curve, std::ostream& out);

/// CSV `kappa,lower,upper`, one row per interval.
void write_region_header(std::ostream& out);
void write_region_rows(const SurrogacyRegion& region, std::ostream& out);

}  // namespace etsi
