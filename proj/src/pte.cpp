#include "etsi/pte.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "etsi/errors.hpp"
#include "etsi/parallel.hpp"
#include "etsi/simd/kernel_sums.hpp"

namespace etsi {

namespace {

constexpr double kDenominatorFloor = 1e-12;
constexpr std::size_t kMinPerArm = 10;

struct ArmColumns {
  std::vector<double> w, s, y;
};

struct Columns {
  ArmColumns arm[2];
};

Columns split_arms(const Study& study) {
  if (!study.has_full_outcome() || !study.has_full_surrogate()) {
    throw ValidationError("PTE estimation needs S and Y for every subject");
  }
  Columns c;
  for (const Subject& s : study.subjects()) {
    ArmColumns& a = c.arm[s.arm];
    a.w.push_back(s.w);
    a.s.push_back(*s.s);
    a.y.push_back(*s.y);
  }
  return c;
}

// Arm-1 regression of Y on (S, W) with a product Gaussian kernel, evaluated at
// every arm-0 surrogate value for one covariate value u.
std::size_t product_kernel_means(const ArmColumns& a1, std::span<const double> s0, double u,
                                 PteBandwidths h, std::span<double> out) {
  const std::size_t m = a1.w.size();
  std::vector<double> kw(m);
  simd::gauss_weights(a1.w, u, 1.0 / h.w, kw);
  std::size_t fallbacks = 0;
  for (std::size_t i = 0; i < s0.size(); ++i) {
    const simd::KernelSums sums = simd::gauss_sums_weighted(a1.s, kw, a1.y, s0[i], 1.0 / h.s);
    if (sums.weight >= kDenominatorFloor * static_cast<double>(m)) {
      out[i] = sums.weighted / sums.weight;
      continue;
    }
    // Nearest neighbour in the bandwidth-scaled (s, w) metric.
    ++fallbacks;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const double ds = (a1.s[j] - s0[i]) / h.s;
      const double dw = (a1.w[j] - u) / h.w;
      const double d = ds * ds + dw * dw;
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out[i] = a1.y[best];
  }
  return fallbacks;
}

PtePointDetail evaluate_point(const Columns& c, const ConditionalMeanFit& fit1,
                              const ConditionalMeanFit& fit0, double u, PteBandwidths h) {
  PtePointDetail d;
  d.u = u;
  d.m1 = fit1.predict(u);
  d.m0 = fit0.predict(u);
  CdfWeights f = conditional_cdf_weights(c.arm[0].w, u, KernelConfig{Kernel::gaussian, h.w});
  d.cdf_weights = std::move(f.weights);
  d.cdf_fallback = f.fallback;
  d.mu1.resize(c.arm[0].s.size());
  d.mu1_fallbacks = product_kernel_means(c.arm[1], c.arm[0].s, u, h, d.mu1);
  double m10 = 0.0;
  for (std::size_t i = 0; i < d.mu1.size(); ++i) m10 += d.cdf_weights[i] * d.mu1[i];
  d.m10 = m10;
  return d;
}

void check_bandwidths(PteBandwidths h) {
  validate(KernelConfig{Kernel::gaussian, h.w});
  validate(KernelConfig{Kernel::gaussian, h.s});
}

}  // namespace

std::size_t PteCurve::defined_count() const {
  return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), true));
}

PteBandwidths pte_bandwidths(const Study& study_a, const PteOptions& options) {
  const Columns c = split_arms(study_a);
  const double scale = options.rule == PteBandwidthRule::etsi
                           ? std::pow(static_cast<double>(c.arm[0].w.size()), -0.2)
                           : 1.0;
  PteBandwidths h;
  if (options.bandwidth_override) {
    h.w = *options.bandwidth_override;
  } else {
    std::vector<double> pooled = c.arm[0].w;
    pooled.insert(pooled.end(), c.arm[1].w.begin(), c.arm[1].w.end());
    h.w = bandwidth_rule_of_thumb(pooled) * scale;
  }
  h.s = options.surrogate_bandwidth_override
            ? *options.surrogate_bandwidth_override
            : bandwidth_rule_of_thumb(c.arm[1].s) * scale;
  check_bandwidths(h);
  return h;
}

PtePointDetail pte_point_detail(const Study& study_a, double u, PteBandwidths h) {
  if (!std::isfinite(u)) throw UsageError("grid point must be finite");
  check_bandwidths(h);
  const Columns c = split_arms(study_a);
  const ConditionalMeanFit fit1(c.arm[1].w, c.arm[1].y, {Kernel::gaussian, h.w});
  const ConditionalMeanFit fit0(c.arm[0].w, c.arm[0].y, {Kernel::gaussian, h.w});
  return evaluate_point(c, fit1, fit0, u, h);
}

PteCurve estimate_pte(const Study& study_a, const PteOptions& options) {
  if (study_a.role() != Role::A) throw UsageError("PTE estimation needs a Study A data set");
  if (options.grid_size < 2) throw UsageError("grid size must be at least 2");
  for (int g : {0, 1}) {
    if (study_a.arm_count(g) < kMinPerArm) {
      throw ValidationError("PTE estimation needs at least " + std::to_string(kMinPerArm) +
                            " subjects per arm; arm " + std::to_string(g) + " has " +
                            std::to_string(study_a.arm_count(g)));
    }
  }
  const Columns c = split_arms(study_a);
  const PteBandwidths h = pte_bandwidths(study_a, options);
  const ConditionalMeanFit fit1(c.arm[1].w, c.arm[1].y, {Kernel::gaussian, h.w});
  const ConditionalMeanFit fit0(c.arm[0].w, c.arm[0].y, {Kernel::gaussian, h.w});

  const StudySummary summary = summarize(study_a);
  const std::size_t n = options.grid_size;
  PteCurve curve;
  curve.bandwidths = h;
  curve.grid.resize(n);
  const double lo = summary.w.min;
  const double step = (summary.w.max - lo) / static_cast<double>(n - 1);
  for (std::size_t k = 0; k < n; ++k) curve.grid[k] = lo + step * static_cast<double>(k);
  curve.grid.back() = summary.w.max;
  for (std::size_t k = 1; k < n; ++k) {
    if (!(curve.grid[k] > curve.grid[k - 1])) {
      throw NumericalError("covariate range too narrow for a strictly ascending grid");
    }
  }

  const double y_abs_max = std::max(std::abs(summary.y->min), std::abs(summary.y->max));
  curve.epsilon = 1e-6 * y_abs_max;

  curve.delta_k.resize(n);
  curve.delta_s_k.resize(n);
  curve.r_s.resize(n);
  std::vector<char> defined(n, 0);
  parallel_for(n, [&](std::size_t k) {
    const PtePointDetail d = evaluate_point(c, fit1, fit0, curve.grid[k], h);
    const double dk = d.m1 - d.m0;
    const double dsk = d.m10 - d.m0;
    curve.delta_k[k] = dk;
    curve.delta_s_k[k] = dsk;
    if (std::abs(dk) >= curve.epsilon && dk != 0.0) {
      curve.r_s[k] = 1.0 - dsk / dk;
      defined[k] = 1;
    } else {
      curve.r_s[k] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  curve.defined.assign(defined.begin(), defined.end());
  return curve;
}

SurrogacyRegion::SurrogacyRegion(double kappa, std::vector<Interval> intervals,
                                 Range grid_range)
    : kappa_(kappa), intervals_(std::move(intervals)), grid_range_(grid_range) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const Interval& iv = intervals_[i];
    if (!(iv.lower <= iv.upper) || iv.lower < grid_range_.min || iv.upper > grid_range_.max ||
        (i > 0 && !(intervals_[i - 1].upper < iv.lower))) {
      throw UsageError("region intervals must be ascending, disjoint and inside the grid range");
    }
  }
}

SurrogacyRegion SurrogacyRegion::full(Range grid_range, double kappa) {
  return SurrogacyRegion(kappa, {Interval{grid_range.min, grid_range.max}}, grid_range);
}

SurrogacyRegion SurrogacyRegion::none(Range grid_range, double kappa) {
  return SurrogacyRegion(kappa, {}, grid_range);
}

double SurrogacyRegion::measure() const {
  double total = 0.0;
  for (const Interval& iv : intervals_) total += iv.upper - iv.lower;
  return total;
}

bool SurrogacyRegion::contains(double w) const {
  if (!std::isfinite(w)) throw UsageError("membership query must be finite");
  if (w < grid_range_.min || w > grid_range_.max) return false;
  const auto it = std::upper_bound(intervals_.begin(), intervals_.end(), w,
                                   [](double v, const Interval& iv) { return v < iv.lower; });
  return it != intervals_.begin() && w <= std::prev(it)->upper;
}

SurrogacyRegion build_region(const PteCurve& curve, double kappa) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw UsageError("kappa must lie strictly between 0 and 1");
  if (curve.defined_count() < 2) {
    throw NumericalError("PTE curve has fewer than 2 defined points; no region can be built");
  }
  const std::vector<double>& g = curve.grid;
  const std::size_t n = g.size();
  auto above = [&](std::size_t k) { return curve.defined[k] && curve.r_s[k] > kappa; };

  std::vector<Interval> intervals;
  std::size_t k = 0;
  while (k < n) {
    if (!above(k)) {
      ++k;
      continue;
    }
    const std::size_t first = k;
    while (k + 1 < n && above(k + 1)) ++k;
    const std::size_t last = k;
    const double lower = first == 0 ? g.front() : 0.5 * (g[first - 1] + g[first]);
    const double upper = last == n - 1 ? g.back() : 0.5 * (g[last] + g[last + 1]);
    intervals.push_back({lower, upper});
    ++k;
  }
  return SurrogacyRegion(kappa, std::move(intervals), Range{g.front(), g.back()});
}

void write_curve(const PteCurve& curve, std::ostream& out) {
  out << "w,delta_k,delta_s_k,r_s,defined\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << format_number(curve.grid[k]) << ',' << format_number(curve.delta_k[k]) << ','
        << format_number(curve.delta_s_k[k]) << ','
        << (curve.defined[k] ? format_number(curve.r_s[k]) : std::string("NA")) << ','
        << (curve.defined[k] ? 1 : 0) << '\n';
  }
}

void write_region_header(std::ostream& out) { out << "kappa,lower,upper\n"; }

void write_region_rows(const SurrogacyRegion& region, std::ostream& out) {
  for (const Interval& iv : region.intervals()) {
    out << format_number(region.kappa()) << ',' << format_number(iv.lower) << ','
        << format_number(iv.upper) << '\n';
  }
}

}  // namespace etsi
