#include "etsi/sim_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>

#include "etsi/errors.hpp"
#include "etsi/parallel.hpp"
#include "etsi/pooled_test.hpp"

namespace etsi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gamma means, shape * scale.
constexpr double kMeanS1 = 2.55 * 2.55;
constexpr double kMeanS0 = 2.4 * 2.4;

// Setting 2 bands: Y = a + b S per arm, W cut at 2.5, 5, 7.5.
struct Band {
  double a1, b1, a0, b0;
};
constexpr Band kBands[4] = {
    {2.8, 0.0, 1.0, 0.0},
    {1.1, 0.4, 0.8, 0.3},
    {1.5, 1.6, 1.0, 1.5},
    {0.0, 1.85, 0.0, 1.8},
};

int band_of(double w) {
  if (w < 2.5) return 0;
  if (w < 5.0) return 1;
  if (w < 7.5) return 2;
  return 3;
}

double band_effect(const Band& b) { return b.a1 + b.b1 * kMeanS1 - b.a0 - b.b0 * kMeanS0; }
double band_surrogate_residual(const Band& b) {
  return b.a1 + b.b1 * kMeanS0 - b.a0 - b.b0 * kMeanS0;
}

void check_setting(int setting) {
  if (setting < 1 || setting > 3) {
    throw UsageError("unknown setting " + std::to_string(setting) + "; expected 1, 2 or 3");
  }
}

std::string na_or(double v) { return std::isnan(v) ? std::string("NA") : format_number(v); }

struct IterationResult {
  TestResult b;
  TestResult ab;
  std::vector<std::optional<TestResult>> p;  // empty when the variance is undefined
};

// Null entries are skipped and counted.
EstimatorSummary summarize_runs(std::vector<const TestResult*> runs) {
  EstimatorSummary s;
  const auto kept = std::remove(runs.begin(), runs.end(), nullptr);
  s.undefined = static_cast<std::size_t>(runs.end() - kept);
  runs.erase(kept, runs.end());
  if (runs.empty()) {
    s.mean_estimate = s.ese = s.ase = s.effect_size = s.rejection_rate = kNaN;
    return s;
  }
  const auto n = static_cast<double>(runs.size());
  double sum = 0.0, se_sum = 0.0, es_sum = 0.0;
  std::size_t rejections = 0;
  for (const TestResult* r : runs) {
    sum += r->estimate;
    se_sum += r->se;
    es_sum += r->estimate / r->se;
    rejections += r->wald.reject ? 1 : 0;
  }
  s.mean_estimate = sum / n;
  s.ase = se_sum / n;
  s.effect_size = es_sum / n;
  s.rejection_rate = static_cast<double>(rejections) / n;
  if (runs.size() < 2) {
    s.ese = kNaN;
  } else {
    double ss = 0.0;
    for (const TestResult* r : runs) ss += (r->estimate - s.mean_estimate) * (r->estimate - s.mean_estimate);
    s.ese = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

}  // namespace

void validate(const SettingSpec& spec) {
  check_setting(spec.id);
  for (std::size_t n : {spec.n_a1, spec.n_a0, spec.n_b1, spec.n_b0}) {
    if (n < 10) throw UsageError("every arm size must be at least 10");
  }
  if (spec.iterations < 1) throw UsageError("iterations must be at least 1");
  if (spec.kappas.empty()) throw UsageError("at least one kappa is required");
  for (double k : spec.kappas) {
    if (!(k > 0.0 && k < 1.0)) throw UsageError("kappa must lie strictly between 0 and 1");
  }
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw UsageError("alpha must lie strictly between 0 and 1");
  }
}

Study generate_study(int setting, std::size_t n1, std::size_t n0, Philox4x32& rng) {
  check_setting(setting);
  std::vector<Subject> subjects;
  subjects.reserve(n1 + n0);
  const Range support = covariate_support(setting);
  std::uniform_real_distribution<double> unif_w(support.min, support.max);
  for (int arm : {1, 0}) {
    const std::size_t n = arm == 1 ? n1 : n0;
    const double shape = arm == 1 ? 2.55 : 2.4;
    std::gamma_distribution<double> gamma(shape, shape);
    std::normal_distribution<double> noise(0.0, setting == 1 ? 1.0 : setting == 2 ? 3.0 : 6.0);
    std::normal_distribution<double> s3(2.0, 3.0);
    for (std::size_t i = 0; i < n; ++i) {
      Subject s;
      s.arm = arm;
      s.w = unif_w(rng);
      double sv = 0.0, yv = 0.0;
      if (setting == 3) {
        sv = s3(rng);
        yv = 2.0 * sv + s.w + noise(rng);
      } else {
        sv = gamma(rng);
        const double e = noise(rng);
        if (setting == 1) {
          if (s.w < 5.0) {
            yv = (arm == 1 ? 2.8 : 1.0) + e;
          } else {
            yv = (arm == 1 ? 2.9 : 2.8) * sv + e;
          }
        } else {
          const Band& b = kBands[band_of(s.w)];
          yv = (arm == 1 ? b.a1 + b.b1 * sv : b.a0 + b.b0 * sv) + e;
        }
      }
      s.s = sv;
      s.y = yv;
      subjects.push_back(s);
    }
  }
  return Study::create(Role::A, std::move(subjects));
}

Study mask_study_b(const Study& full, const SurrogacyRegion& region) {
  std::vector<Subject> out;
  out.reserve(full.size());
  for (const Subject& s : full.subjects()) {
    if (!s.s || !s.y) throw ValidationError("masking needs a fully observed study");
    Subject m;
    m.arm = s.arm;
    m.w = s.w;
    const bool inside = region.contains(s.w);
    m.delta = inside ? 1 : 0;
    if (inside) {
      m.s = s.s;
    } else {
      m.y = s.y;
    }
    out.push_back(m);
  }
  return Study::create(Role::B, std::move(out));
}

double true_delta_b(int setting) {
  check_setting(setting);
  if (setting == 1) return 0.5 * (2.8 - 1.0) + 0.5 * (2.9 * kMeanS1 - 2.8 * kMeanS0);
  if (setting == 2) {
    double total = 0.0;
    for (const Band& b : kBands) total += band_effect(b);
    return total / 4.0;
  }
  return 0.0;
}

double true_pte(int setting, double w) {
  check_setting(setting);
  if (setting == 1) {
    if (w < 5.0) return 0.0;
    return 1.0 - (2.9 - 2.8) * kMeanS0 / (2.9 * kMeanS1 - 2.8 * kMeanS0);
  }
  if (setting == 2) {
    const Band& b = kBands[band_of(w)];
    return 1.0 - band_surrogate_residual(b) / band_effect(b);
  }
  return kNaN;
}

std::vector<double> pte_breaks(int setting) {
  check_setting(setting);
  if (setting == 1) return {5.0};
  if (setting == 2) return {2.5, 5.0, 7.5};
  return {};
}

Range covariate_support(int setting) {
  check_setting(setting);
  return setting == 3 ? Range{0.0, 12.0} : Range{0.0, 10.0};
}

double true_pi_b(int setting, const SurrogacyRegion& region) {
  const Range support = covariate_support(setting);
  double covered = 0.0;
  for (const Interval& iv : region.intervals()) {
    const double lo = std::max(iv.lower, support.min);
    const double hi = std::min(iv.upper, support.max);
    if (hi > lo) covered += hi - lo;
  }
  return covered / (support.max - support.min);
}

const EstimatorSummary& SimulationReport::row(const std::string& estimator,
                                              std::optional<double> kappa) const {
  for (const EstimatorSummary& r : rows) {
    if (r.estimator == estimator && r.kappa.has_value() == kappa.has_value() &&
        (!kappa || *r.kappa == *kappa)) {
      return r;
    }
  }
  throw UsageError("no report row for estimator " + estimator);
}

SimulationReport run_simulation(const SettingSpec& spec, const ProgressFn& progress) {
  validate(spec);
  SimulationReport report;
  report.setting = spec.id;
  report.seed = spec.seed;
  report.iterations = spec.iterations;

  Philox4x32 rng_a(spec.seed, stream_id(stream_domain::study_a, 0));
  report.study_a = generate_study(spec.id, spec.n_a1, spec.n_a0, rng_a);
  const Study& study_a = *report.study_a;
  report.curve = estimate_pte(study_a, spec.pte);

  const std::size_t n_kappa = spec.kappas.size();
  std::vector<std::optional<ConditionalMeanFit>> nu(n_kappa);
  for (std::size_t k = 0; k < n_kappa; ++k) {
    report.regions.push_back(build_region(report.curve, spec.kappas[k]));
    if (!report.regions.back().empty()) nu[k] = fit_nu_a0(study_a, report.regions.back());
  }
  const ConditionalMeanFit mu = fit_mu_a0(study_a);

  std::vector<IterationResult> results(spec.iterations);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(spec.iterations, [&](std::size_t t) {
    try {
      Philox4x32 rng(spec.seed, stream_id(stream_domain::study_b, t));
      const Study full = generate_study(spec.id, spec.n_b1, spec.n_b0, rng);
      IterationResult& r = results[t];
      r.b = delta_b_hat(full, spec.alpha);
      r.ab = delta_ab_hat(mu, full, spec.alpha);
      r.p.reserve(n_kappa);
      for (std::size_t k = 0; k < n_kappa; ++k) {
        const Study masked = mask_study_b(full, report.regions[k]);
        const std::vector<double> imputed = nu[k] ? impute(*nu[k], masked) : std::vector<double>{};
        if (variance_defined(delta_p_hat(masked, imputed).components)) {
          r.p.push_back(pooled_test(masked, imputed, spec.alpha));
        } else {
          r.p.emplace_back();
        }
      }
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(t) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("iteration " + std::to_string(t) + ": " + e.what());
    }
    if (progress) {
      const std::size_t d = done.fetch_add(1) + 1;
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(d, spec.iterations);
    }
  });

  std::vector<const TestResult*> runs(spec.iterations);
  auto collect = [&](auto pick, std::string name, std::optional<double> kappa) {
    for (std::size_t t = 0; t < spec.iterations; ++t) runs[t] = pick(results[t]);
    EstimatorSummary s = summarize_runs(runs);
    s.estimator = std::move(name);
    s.kappa = kappa;
    report.rows.push_back(std::move(s));
  };
  collect([](const IterationResult& r) { return &r.b; }, "delta_b", {});
  collect([](const IterationResult& r) { return &r.ab; }, "delta_ab", {});
  for (std::size_t k = 0; k < n_kappa; ++k) {
    collect(
        [k](const IterationResult& r) -> const TestResult* {
          return r.p[k] ? &*r.p[k] : nullptr;
        },
        "delta_p", spec.kappas[k]);
    report.rows.back().pi_b_true = true_pi_b(spec.id, report.regions[k]);
  }
  return report;
}

std::vector<DesignCheckRow> run_design_check(const SettingSpec& spec,
                                             const SimulationReport& report,
                                             std::optional<double> psi) {
  validate(spec);
  if (!report.study_a) throw UsageError("design check needs a completed simulation report");
  const double effect = psi ? *psi : true_delta_b(spec.id);
  GcvOptions gcv;
  gcv.iterations = spec.gcv_iterations;
  gcv.holdout = spec.holdout;
  gcv.seed = spec.seed;
  std::vector<DesignCheckRow> rows;
  for (std::size_t k = 0; k < spec.kappas.size(); ++k) {
    const DesignEstimates est = gcv_design(*report.study_a, report.regions.at(k), gcv);
    PowerQuery q;
    q.n1 = static_cast<double>(spec.n_b1);
    q.n0 = static_cast<double>(spec.n_b0);
    q.psi = effect;
    q.pi_b = est.pi_a;
    DesignCheckRow row;
    row.setting = spec.id;
    row.kappa = spec.kappas[k];
    row.estimated_power = expected_power(est, q);
    row.empirical_power = report.row("delta_p", spec.kappas[k]).rejection_rate;
    rows.push_back(row);
  }
  return rows;
}

void write_simulation_report(const SimulationReport& report, std::ostream& out) {
  out << "setting,estimator,kappa,mean_estimate,ese,ase,effect_size,rejection_rate,pi_b_true\n";
  for (const EstimatorSummary& r : report.rows) {
    out << report.setting << ',' << r.estimator << ','
        << (r.kappa ? format_number(*r.kappa) : std::string("NA")) << ','
        << na_or(r.mean_estimate) << ',' << na_or(r.ese) << ',' << na_or(r.ase) << ','
        << na_or(r.effect_size) << ',' << na_or(r.rejection_rate) << ','
        << (r.pi_b_true ? format_number(*r.pi_b_true) : std::string("NA")) << '\n';
  }
}

void write_design_check(const std::vector<DesignCheckRow>& rows, std::ostream& out) {
  out << "setting,kappa,estimated_power,empirical_power\n";
  for (const DesignCheckRow& r : rows) {
    out << r.setting << ',' << format_number(r.kappa) << ',' << format_number(r.estimated_power)
        << ',' << format_number(r.empirical_power) << '\n';
  }
}

}  // namespace etsi
