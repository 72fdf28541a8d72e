#include "etsi/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>

#include "etsi/errors.hpp"
#include "etsi/normal.hpp"
#include "etsi/parallel.hpp"
#include "etsi/rng.hpp"

namespace etsi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-split quantities; NaN marks an empty stratum.
struct SplitStats {
  double ybar_outside[2] = {kNaN, kNaN};
  double ybar_inside[2] = {kNaN, kNaN};
  double s2[4] = {kNaN, kNaN, kNaN, kNaN};
  double delta_outside = kNaN;
  double delta_inside = kNaN;
  double delta_total = 0.0;
  std::size_t attempts = 0;
  bool ok = false;
};

struct Prepared {
  std::vector<std::size_t> by_arm[2];      // subject indices per arm
  std::vector<char> inside;                // per subject
  std::size_t full_count[2][2] = {};       // [arm][inside]
  bool needs_fit = false;
};

void moments(const std::vector<double>& v, double& mean, double& var) {
  if (v.empty()) return;
  double sum = 0.0;
  for (double x : v) sum += x;
  mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  var = ss / static_cast<double>(v.size() - 1);
}

// Returns false when the split leaves a required stratum too small.
bool evaluate_split(const Study& study, const Prepared& prep,
                    const std::vector<std::size_t> (&fit)[2],
                    const std::vector<std::size_t> (&eval)[2], SplitStats& out) {
  const auto subjects = study.subjects();

  std::size_t eval_count[2][2] = {};
  for (int g : {0, 1}) {
    for (std::size_t i : eval[g]) ++eval_count[g][prep.inside[i] ? 1 : 0];
  }
  for (int g : {0, 1}) {
    for (int k : {0, 1}) {
      if (prep.full_count[g][k] > 0 && eval_count[g][k] < 2) return false;
    }
  }

  std::optional<ConditionalMeanFit> nu;
  if (prep.needs_fit) {
    std::vector<double> xs, ys;
    for (std::size_t i : fit[0]) {
      if (!prep.inside[i]) continue;
      xs.push_back(*subjects[i].s);
      ys.push_back(*subjects[i].y);
    }
    if (xs.size() < 2) return false;
    const double h = bandwidth_etsi(xs, fit[0].size());
    nu.emplace(std::move(xs), std::move(ys), KernelConfig{Kernel::gaussian, h});
  }

  double arm_mean[2];
  for (int g : {0, 1}) {
    std::vector<double> outside, inside;
    double sum = 0.0;
    for (std::size_t i : eval[g]) {
      const Subject& s = subjects[i];
      sum += *s.y;
      if (prep.inside[i]) {
        inside.push_back(nu->predict(*s.s));
      } else {
        outside.push_back(*s.y);
      }
    }
    arm_mean[g] = sum / static_cast<double>(eval[g].size());
    const int slot = g == 1 ? 0 : 2;
    moments(outside, out.ybar_outside[g], out.s2[slot]);
    moments(inside, out.ybar_inside[g], out.s2[slot + 1]);
  }
  out.delta_outside = out.ybar_outside[1] - out.ybar_outside[0];
  out.delta_inside = out.ybar_inside[1] - out.ybar_inside[0];
  out.delta_total = arm_mean[1] - arm_mean[0];
  return true;
}

double clamp_open_unit(double p) {
  const double lo = std::numeric_limits<double>::denorm_min();
  const double hi = std::nextafter(1.0, 0.0);
  return std::clamp(p, lo, hi);
}

// n_g^-1 scaled bracket for one arm: (1-pi) s_out + pi s_in + pi(1-pi) gap^2.
double arm_bracket(double pi, double s_out, double s_in, double y_out, double y_in) {
  double v = 0.0;
  if (pi < 1.0) {
    if (std::isnan(s_out)) throw NumericalError("design variance undefined outside the region");
    v += (1.0 - pi) * s_out;
  }
  if (pi > 0.0) {
    if (std::isnan(s_in)) throw NumericalError("design variance undefined inside the region");
    v += pi * s_in;
  }
  if (pi > 0.0 && pi < 1.0) v += pi * (1.0 - pi) * (y_out - y_in) * (y_out - y_in);
  return v;
}

double effect_per_psi(const DesignEstimates& est, double pi) {
  double e = 0.0;
  if (pi < 1.0) {
    if (std::isnan(est.tau)) throw NumericalError("outside-region effect share is undefined");
    e += (1.0 - pi) * est.tau;
  }
  if (pi > 0.0) {
    if (std::isnan(est.rho)) throw NumericalError("inside-region effect share is undefined");
    e += pi * est.rho;
  }
  return e;
}

void check_pi(double pi) {
  if (!(pi >= 0.0 && pi <= 1.0)) throw UsageError("pi_B must lie in [0, 1]");
}

}  // namespace

DesignEstimates gcv_design(const Study& study_a, const SurrogacyRegion& region,
                           const GcvOptions& options) {
  if (study_a.role() != Role::A) throw UsageError("design needs a Study A data set");
  if (options.iterations < 1) throw UsageError("GCV iterations must be at least 1");
  if (!(options.holdout > 0.0 && options.holdout < 1.0)) {
    throw UsageError("holdout must lie strictly between 0 and 1");
  }

  const auto subjects = study_a.subjects();
  Prepared prep;
  prep.inside.resize(subjects.size());
  double y_abs_max = 0.0;
  std::size_t in_region = 0;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Subject& s = subjects[i];
    prep.by_arm[s.arm].push_back(i);
    prep.inside[i] = region.contains(s.w);
    ++prep.full_count[s.arm][prep.inside[i] ? 1 : 0];
    in_region += prep.inside[i] ? 1 : 0;
    y_abs_max = std::max(y_abs_max, std::abs(*s.y));
  }
  prep.needs_fit = prep.full_count[0][1] + prep.full_count[1][1] > 0;

  const std::size_t iterations = options.split_disabled ? 1 : options.iterations;
  const std::size_t cap = 10 * iterations;
  std::vector<SplitStats> stats(iterations);

  parallel_for(iterations, [&](std::size_t it) {
    SplitStats& st = stats[it];
    if (options.split_disabled) {
      st.attempts = 1;
      if (!evaluate_split(study_a, prep, prep.by_arm, prep.by_arm, st)) {
        throw NumericalError("design: a required stratum has fewer than 2 subjects");
      }
      st.ok = true;
      return;
    }
    for (std::size_t attempt = 0; attempt <= cap; ++attempt) {
      Philox4x32 rng(options.seed,
                     stream_id(stream_domain::gcv, it, static_cast<std::uint32_t>(attempt)));
      std::vector<std::size_t> fit[2], eval[2];
      for (int g : {0, 1}) {
        std::vector<std::size_t> idx = prep.by_arm[g];
        for (std::size_t k = idx.size() - 1; k > 0; --k) {
          std::uniform_int_distribution<std::size_t> pick(0, k);
          std::swap(idx[k], idx[pick(rng)]);
        }
        const double target = std::round(options.holdout * static_cast<double>(idx.size()));
        const auto n_eval =
            std::clamp<std::size_t>(static_cast<std::size_t>(target), 1, idx.size() - 1);
        eval[g].assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_eval));
        fit[g].assign(idx.begin() + static_cast<std::ptrdiff_t>(n_eval), idx.end());
        std::sort(eval[g].begin(), eval[g].end());
        std::sort(fit[g].begin(), fit[g].end());
      }
      st.attempts = attempt + 1;
      if (evaluate_split(study_a, prep, fit, eval, st)) {
        st.ok = true;
        return;
      }
    }
  });

  DesignEstimates est;
  std::size_t redraws = 0;
  bool all_ok = true;
  for (const SplitStats& st : stats) {
    redraws += st.attempts - 1;
    all_ok = all_ok && st.ok;
  }
  if (!all_ok || redraws > cap) {
    throw NumericalError("design: splits left a required stratum with fewer than 2 subjects in " +
                         std::to_string(redraws) + " redraws");
  }

  const double inv = 1.0 / static_cast<double>(iterations);
  for (int g : {0, 1}) {
    est.ybar_outside[g] = 0.0;
    est.ybar_inside[g] = 0.0;
  }
  for (double& v : est.s2) v = 0.0;
  for (const SplitStats& st : stats) {
    for (int g : {0, 1}) {
      est.ybar_outside[g] += st.ybar_outside[g] * inv;
      est.ybar_inside[g] += st.ybar_inside[g] * inv;
    }
    for (int k = 0; k < 4; ++k) est.s2[k] += st.s2[k] * inv;
    est.delta_outside += st.delta_outside * inv;
    est.delta_inside += st.delta_inside * inv;
    est.delta_total += st.delta_total * inv;
  }
  if (!(std::abs(est.delta_total) >= 1e-6 * y_abs_max) || est.delta_total == 0.0) {
    throw NumericalError("design undefined: averaged total effect in Study A is numerically zero");
  }
  est.tau = est.delta_outside / est.delta_total;
  est.rho = est.delta_inside / est.delta_total;
  est.pi_a = static_cast<double>(in_region) / static_cast<double>(subjects.size());
  est.iterations = iterations;
  est.redraws = redraws;
  est.holdout = options.holdout;
  est.seed = options.seed;
  return est;
}

double expected_power(const DesignEstimates& est, const PowerQuery& q) {
  if (!(q.n1 > 0.0) || !(q.n0 > 0.0) || !std::isfinite(q.n1) || !std::isfinite(q.n0)) {
    throw UsageError("planned arm sizes must be positive");
  }
  if (!(q.psi >= 0.0) || !std::isfinite(q.psi)) throw UsageError("psi must be nonnegative");
  check_pi(q.pi_b);
  const double pi = q.pi_b;
  const double var =
      arm_bracket(pi, est.s2[0], est.s2[1], est.ybar_outside[1], est.ybar_inside[1]) / q.n1 +
      arm_bracket(pi, est.s2[2], est.s2[3], est.ybar_outside[0], est.ybar_inside[0]) / q.n0;
  if (!(var > 0.0)) throw NumericalError("design standard error is zero");
  const double effect = effect_per_psi(est, pi) * q.psi;
  return clamp_open_unit(normal_sf(kDesignCritical - effect / std::sqrt(var)));
}

RequiredN required_n(const DesignEstimates& est, double psi, double pi_b, double beta) {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw UsageError("psi must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw UsageError("beta must lie strictly between 0 and 1");
  check_pi(pi_b);
  const double effect = effect_per_psi(est, pi_b) * psi;
  if (!(effect > 0.0)) {
    throw NumericalError("no sample size achieves the target: planned effect is not positive");
  }
  const double v =
      arm_bracket(pi_b, est.s2[0], est.s2[1], est.ybar_outside[1], est.ybar_inside[1]) +
      arm_bracket(pi_b, est.s2[2], est.s2[3], est.ybar_outside[0], est.ybar_inside[0]);
  if (!(v > 0.0)) throw NumericalError("design standard error is zero");
  const double ratio = (kDesignCritical - normal_quantile(beta)) / effect;
  RequiredN r;
  r.n = ratio * ratio * v;
  r.n_ceil = static_cast<std::size_t>(std::ceil(r.n));
  return r;
}

std::vector<PowerGridRow> power_grid(const Study& study_a, const PteCurve& curve,
                                     std::span<const double> kappas, std::span<const double> psis,
                                     std::span<const std::size_t> n_totals,
                                     const GcvOptions& options) {
  if (kappas.empty() || psis.empty() || n_totals.empty()) {
    throw UsageError("power grid needs at least one kappa, psi and total size");
  }
  for (std::size_t n : n_totals) {
    if (n < 2) throw UsageError("total sample size must be at least 2");
  }
  std::vector<PowerGridRow> rows;
  for (double kappa : kappas) {
    DesignEstimates est;
    try {
      est = gcv_design(study_a, build_region(curve, kappa), options);
    } catch (const NumericalError& e) {
      throw NumericalError("kappa=" + format_number(kappa) + ": " + e.what());
    }
    for (double psi : psis) {
      for (std::size_t n : n_totals) {
        PowerQuery q;
        q.n1 = static_cast<double>(n - n / 2);
        q.n0 = static_cast<double>(n / 2);
        q.psi = psi;
        q.pi_b = est.pi_a;
        rows.push_back({kappa, psi, n, expected_power(est, q)});
      }
    }
  }
  return rows;
}

void write_power_grid(std::span<const PowerGridRow> rows, std::ostream& out) {
  out << "kappa,psi,n_total,power\n";
  for (const PowerGridRow& r : rows) {
    out << format_number(r.kappa) << ',' << format_number(r.psi) << ',' << r.n_total << ','
        << format_number(r.power) << '\n';
  }
}

}  // namespace etsi
