// Runs the acceptance criteria at their stated tolerances and prints one
// PASS/FAIL line each. Exit status is nonzero when any criterion fails.
//
// All simulations use the default seed and default sizes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "etsi/design.hpp"
#include "etsi/normal.hpp"
#include "etsi/parallel.hpp"
#include "etsi/pooled_test.hpp"
#include "etsi/sim_lab.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace etsi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAIL]");
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Run {
  SettingSpec spec;
  SimulationReport report;
  double seconds = 0.0;
};

Run simulate(int setting) {
  Run r;
  r.spec.id = setting;
  const auto t0 = std::chrono::steady_clock::now();
  r.report = run_simulation(r.spec);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Outcome criterion1(const Run& s3) {
  Outcome o;
  for (double k : s3.spec.kappas) {
    const double rate = s3.report.row("delta_p", k).rejection_rate;
    o.require(within(rate, 0.03, 0.07), fmt("kappa=%.1f rate=%.3f", k, rate));
  }
  o.require(s3.seconds <= 600.0, fmt("runtime=%.1fs", s3.seconds));
  return o;
}

Outcome criterion2(const Run& s1) {
  Outcome o;
  const SimulationReport& r = s1.report;
  const double ab = r.row("delta_ab").rejection_rate;
  const double b = r.row("delta_b").rejection_rate;
  const double p7 = r.row("delta_p", 0.7).rejection_rate;
  o.require(std::abs(ab - 0.699) <= 0.06, fmt("delta_ab=%.3f (0.699+-0.06)", ab));
  o.require(std::abs(p7 - 0.838) <= 0.06, fmt("delta_p(0.7)=%.3f (0.838+-0.06)", p7));
  o.require(std::abs(b - 0.882) <= 0.05, fmt("delta_b=%.3f (0.882+-0.05)", b));
  for (double k : s1.spec.kappas) {
    const double p = r.row("delta_p", k).rejection_rate;
    o.require(ab < p && p < b, fmt("order at kappa=%.1f: ", k) + fmt("%.3f < %.3f < %.3f", ab, p, b));
  }
  return o;
}

Outcome criterion3(const Run& s1, const Run& s2) {
  Outcome o;
  for (const Run* run : {&s1, &s2}) {
    const SimulationReport& r = run->report;
    const double truth = true_delta_b(r.setting);
    const EstimatorSummary& b = r.row("delta_b");
    const EstimatorSummary& ab = r.row("delta_ab");
    o.require(std::abs(b.mean_estimate - truth) <= 0.08,
              fmt("S%.0f mean(delta_b)=%.4f truth=%.5f", r.setting, b.mean_estimate, truth));
    const double n = static_cast<double>(r.iterations);
    for (double k : run->spec.kappas) {
      const EstimatorSummary& p = r.row("delta_p", k);
      const double mcse = std::sqrt((p.ese * p.ese + b.ese * b.ese) / n);
      o.require(ab.mean_estimate <= p.mean_estimate &&
                    p.mean_estimate <= b.mean_estimate + 2.0 * mcse,
                fmt("S%.0f kappa=%.1f", r.setting, k) +
                    fmt(" ab=%.3f p=%.3f b=%.3f", ab.mean_estimate, p.mean_estimate,
                        b.mean_estimate));
    }
  }
  return o;
}

Outcome criterion4(const std::vector<const Run*>& runs) {
  Outcome o;
  for (const Run* run : runs) {
    for (const EstimatorSummary& row : run->report.rows) {
      const double ratio = row.ase / row.ese;
      const std::string name = "S" + std::to_string(run->report.setting) + " " + row.estimator +
                               (row.kappa ? fmt("(%.1f)", *row.kappa) : std::string());
      o.require(within(ratio, 0.9, 1.1), name + fmt("=%.3f", ratio));
    }
  }
  return o;
}

Outcome criterion5(const Run& s1, const Run& s2) {
  Outcome o;
  for (const Run* run : {&s1, &s2}) {
    const int setting = run->report.setting;
    const PteCurve& c = run->report.curve;
    const auto breaks = pte_breaks(setting);
    std::vector<double> errors;
    std::size_t undefined = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double w = c.grid[k];
      const bool near = std::any_of(breaks.begin(), breaks.end(),
                                    [&](double b) { return std::abs(w - b) <= 0.5; });
      if (near) continue;
      if (!c.defined[k]) {
        ++undefined;
        continue;
      }
      errors.push_back(std::abs(c.r_s[k] - true_pte(setting, w)));
    }
    const double med = median(errors);
    o.require(med <= 0.10 && undefined == 0,
              fmt("S%.0f median|R-truth|=%.4f over %.0f points", setting, med,
                  static_cast<double>(errors.size())) +
                  (undefined ? " with undefined points" : ""));
  }
  return o;
}

Outcome criterion6(const Run& s1, const Run& s2) {
  Outcome o;
  for (const Run* run : {&s1, &s2}) {
    for (const DesignCheckRow& row : run_design_check(run->spec, run->report)) {
      const double gap = std::abs(row.estimated_power - row.empirical_power);
      o.require(gap <= 0.07, fmt("S%.0f kappa=%.1f", row.setting, row.kappa) +
                                 fmt(" est=%.3f emp=%.3f", row.estimated_power,
                                     row.empirical_power));
    }
  }
  return o;
}

Outcome criterion7(const Run& s1) {
  Outcome o;
  const WaldResult w = wald_test(0.395, 0.168);
  o.require(std::abs(w.z - 2.35) < 0.005 && std::abs(w.p_value - 0.019) < 0.0005 && w.reject,
            fmt("z=%.4f p=%.5f", w.z, w.p_value));

  const SurrogacyRegion region = s1.report.regions.back();
  const DesignEstimates est = gcv_design(*s1.report.study_a, region, {});
  const double p0 = expected_power(est, {.n1 = 500, .n0 = 400, .psi = 0.0, .pi_b = est.pi_a});
  o.require(std::abs(p0 - 0.025) < 1e-4, fmt("power(psi=0)=%.6f", p0));

  double worst = 0.0;
  for (double psi : {0.25, 1.0, 2.26463}) {
    for (double pi : {0.0, 0.3, est.pi_a, 0.9}) {
      for (double beta : {0.05, 0.1, 0.2, 0.5, 0.8}) {
        const RequiredN n = required_n(est, psi, pi, beta);
        const double p = expected_power(est, {.n1 = n.n, .n0 = n.n, .psi = psi, .pi_b = pi});
        worst = std::max(worst, std::abs(p - (1.0 - beta)));
      }
    }
  }
  o.require(worst <= 1e-9, fmt("round-trip max error=%.2e", worst));
  return o;
}

Outcome criterion8() {
  Outcome o;

  // Kernel weights sum to one, predictions stay within the response range.
  bool weights_ok = true, convex_ok = true;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + rep % 50;
    const auto xs = fixtures::uniform(n, -4.0, 4.0, 100000 + rep);
    const auto ys = fixtures::normal(n, 0.0, 10.0, 110000 + rep);
    const double h = 0.02 + fixtures::uniform(1, 0.0, 2.0, 120000 + rep)[0];
    const auto fit = fit_conditional_mean(xs, ys, {Kernel::gaussian, h});
    const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
    for (double u : fixtures::uniform(20, -6.0, 6.0, 130000 + rep)) {
      const auto cw = conditional_cdf_weights(xs, u, {Kernel::gaussian, h});
      double total = 0.0;
      for (double w : cw.weights) {
        total += w;
        weights_ok = weights_ok && w >= 0.0;
      }
      weights_ok = weights_ok && std::abs(total - 1.0) < 1e-12;
      const double p = fit.predict(u);
      convex_ok = convex_ok && p >= *lo && p <= *hi;
    }
  }
  o.require(weights_ok, "weight normalization");
  o.require(convex_ok, "convex-combination bounds");

  // Affine equivariance of the pooled estimate, invariance of z.
  bool equiv_ok = true;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const Study b = fixtures::small_study_b(30 + rep, 25 + rep, 2.0, 140000 + rep);
    std::size_t n_in = 0;
    for (const Subject& s : b.subjects()) n_in += *s.delta == 1;
    const auto imp = fixtures::normal(n_in, 1.0, 1.0, 150000 + rep);
    const TestResult base = pooled_test(b, imp);
    const double a = 0.5 + static_cast<double>(rep), c = -3.0 + static_cast<double>(rep);
    std::vector<double> t(imp);
    for (double& x : t) x = a * x + c;
    const TestResult r = pooled_test(fixtures::affine_y(b, a, c), t);
    equiv_ok = equiv_ok && fixtures::rel_diff(r.estimate, a * base.estimate) < 1e-10 &&
               fixtures::rel_diff(r.se, a * base.se) < 1e-10 &&
               fixtures::rel_diff(r.wald.z, base.wald.z) < 1e-10;
  }
  o.require(equiv_ok, "location/scale equivariance");

  // All delta = 0 reproduces the outcome-only estimator bit for bit.
  bool reduction_ok = true;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const Study a = fixtures::small_study_a(20 + rep, 25 + rep, 160000 + rep);
    std::vector<Subject> masked;
    for (const Subject& s : a.subjects()) {
      Subject m;
      m.arm = s.arm;
      m.w = s.w;
      m.delta = 0;
      m.y = s.y;
      masked.push_back(m);
    }
    const TestResult rb = delta_b_hat(a);
    const TestResult rp = pooled_test(Study::create(Role::B, std::move(masked)), {});
    reduction_ok = reduction_ok && std::memcmp(&rb.estimate, &rp.estimate, sizeof(double)) == 0 &&
                   std::memcmp(&rb.se, &rp.se, sizeof(double)) == 0;
  }
  o.require(reduction_ok, "delta=0 reduction");

  // Every smoother against the double loop on n <= 20.
  double worst = 0.0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rep;
    const auto xs = fixtures::uniform(n, 0.0, 3.0, 170000 + rep);
    const auto ys = fixtures::normal(n, 0.0, 2.0, 180000 + rep);
    const double h = 0.4;
    const auto fit = fit_conditional_mean(xs, ys, {Kernel::gaussian, h});
    for (double u : fixtures::uniform(10, 0.0, 3.0, 190000 + rep)) {
      const double q = std::clamp(u, *std::min_element(xs.begin(), xs.end()),
                                  *std::max_element(xs.begin(), xs.end()));
      worst = std::max(worst, std::abs(fit.predict(u) - oracle::nw(xs, ys, q, h)));
      const auto cw = conditional_cdf_weights(xs, u, {Kernel::gaussian, h});
      const auto ref = oracle::cdf_weights(xs, u, h);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(cw.weights[i] - ref[i]));
    }
    if (n >= 10) {
      const Study study = fixtures::small_study_a(n, n, 200000 + rep);
      const auto a1 = oracle::arm(study, 1), a0 = oracle::arm(study, 0);
      const PteBandwidths bw = pte_bandwidths(study);
      for (double u : {0.5, 1.7, 3.2}) {
        const PtePointDetail d = pte_point_detail(study, u, bw);
        for (std::size_t i = 0; i < a0.s.size(); ++i) {
          worst = std::max(worst, std::abs(d.mu1[i] - oracle::mu1(a1, a0.s[i], u, bw.w, bw.s)));
        }
        worst = std::max(worst, std::abs(d.m10 - oracle::m10(a1, a0, u, bw.w, bw.s)));
      }
    }
  }
  o.require(worst <= 1e-10, fmt("brute force max error=%.2e", worst));

  // Determinism across thread counts.
  SettingSpec spec;
  spec.iterations = 40;
  spec.gcv_iterations = 10;
  const std::size_t saved = max_threads();
  std::vector<std::vector<double>> outputs;
  for (std::size_t threads : {1u, 2u, 8u}) {
    set_max_threads(threads);
    const SimulationReport r = run_simulation(spec);
    std::vector<double> v;
    for (const EstimatorSummary& row : r.rows) {
      v.insert(v.end(), {row.mean_estimate, row.ese, row.ase, row.rejection_rate});
    }
    for (const DesignCheckRow& row : run_design_check(spec, r)) v.push_back(row.estimated_power);
    outputs.push_back(std::move(v));
  }
  set_max_threads(saved);
  o.require(outputs[0] == outputs[1] && outputs[0] == outputs[2], "thread-count determinism");
  return o;
}

}  // namespace

int main() {
  std::fprintf(stderr, "running settings 1-3 at default sizes...\n");
  const Run s1 = simulate(1);
  const Run s2 = simulate(2);
  const Run s3 = simulate(3);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"type I error", [&] { return criterion1(s3); }},
      {"power levels and ordering", [&] { return criterion2(s1); }},
      {"point estimates", [&] { return criterion3(s1, s2); }},
      {"variance calibration", [&] { return criterion4({&s1, &s2, &s3}); }},
      {"PTE recovery", [&] { return criterion5(s1, s2); }},
      {"design fidelity", [&] { return criterion6(s1, s2); }},
      {"formula anchors", [&] { return criterion7(s1); }},
      {"property suites", [&] { return criterion8(); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
