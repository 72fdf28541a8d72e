#include <doctest.h>

#include <cmath>
#include <sstream>

#include "etsi/errors.hpp"
#include "etsi/parallel.hpp"
#include "etsi/sim_lab.hpp"

using namespace etsi;

namespace {

struct Running {
  double n = 0, mean = 0, m2 = 0;
  void add(double x) {
    n += 1;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double se() const { return std::sqrt(m2 / (n - 1) / n); }
};

SettingSpec small_spec(int id) {
  SettingSpec s;
  s.id = id;
  s.n_a1 = 150;
  s.n_a0 = 160;
  s.n_b1 = 60;
  s.n_b0 = 50;
  s.iterations = 25;
  s.kappas = {0.5, 0.7};
  s.seed = 77;
  s.pte.grid_size = 30;
  s.gcv_iterations = 8;
  return s;
}

}  // namespace

TEST_SUITE("sim_lab") {

TEST_CASE("closed-form effects") {
  // Gamma mean = shape * scale: 6.5025 treated, 5.76 control.
  CHECK(true_delta_b(1) == doctest::Approx(0.5 * 1.8 + 0.5 * (2.9 * 6.5025 - 2.8 * 5.76)).epsilon(1e-14));
  CHECK(std::abs(true_delta_b(1) - 2.26463) < 1e-5);
  CHECK(true_delta_b(2) == doctest::Approx((1.8 + 1.173 + 2.264 + (1.85 * 6.5025 - 1.8 * 5.76)) / 4.0).epsilon(1e-12));
  CHECK(std::abs(true_delta_b(2) - 1.72465) < 1e-5);
  CHECK(true_delta_b(3) == 0.0);
  CHECK_THROWS_AS(true_delta_b(4), UsageError);
}

TEST_CASE("closed-form PTE plateaus") {
  CHECK(true_pte(1, 2.0) == 0.0);
  CHECK(true_pte(1, 5.0) == doctest::Approx(1.0 - 0.576 / 2.72925).epsilon(1e-12));
  CHECK(std::abs(true_pte(1, 8.0) - 0.79) < 0.005);
  const double plateaus[4] = {0.0, 0.25, 0.52, 0.83};
  const double ws[4] = {1.0, 3.0, 6.0, 9.0};
  for (int b = 0; b < 4; ++b) CHECK(std::abs(true_pte(2, ws[b]) - plateaus[b]) < 0.01);
  CHECK(std::isnan(true_pte(3, 4.0)));
  CHECK(pte_breaks(2) == std::vector<double>{2.5, 5.0, 7.5});
}

TEST_CASE("true pi_b clips to the support") {
  const SurrogacyRegion r(0.5, {{-1.0, 2.0}, {6.0, 11.0}}, Range{-1.0, 11.0});
  CHECK(true_pi_b(1, r) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(true_pi_b(3, r) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("generator marginals within 3 SE over 10^6 draws") {
  Philox4x32 rng(5, stream_id(stream_domain::generate, 0));
  const Study s1 = generate_study(1, 500000, 500000, rng);
  Running w, s[2], y[2];
  for (const Subject& x : s1.subjects()) {
    w.add(x.w);
    s[x.arm].add(*x.s);
    y[x.arm].add(*x.y);
  }
  CHECK(std::abs(w.mean - 5.0) < 3 * w.se());
  CHECK(std::abs(s[1].mean - 6.5025) < 3 * s[1].se());
  CHECK(std::abs(s[0].mean - 5.76) < 3 * s[0].se());
  CHECK(std::abs(s[1].m2 / (s[1].n - 1) - 2.55 * 2.55 * 2.55) < 0.1);
  CHECK(std::abs(y[1].mean - (0.5 * 2.8 + 0.5 * 2.9 * 6.5025)) < 3 * y[1].se());
  CHECK(std::abs(y[0].mean - (0.5 * 1.0 + 0.5 * 2.8 * 5.76)) < 3 * y[0].se());

  const Study s3 = generate_study(3, 500000, 500000, rng);
  Running w3, s3s, y3;
  for (const Subject& x : s3.subjects()) {
    w3.add(x.w);
    s3s.add(*x.s);
    y3.add(*x.y);
  }
  CHECK(std::abs(w3.mean - 6.0) < 3 * w3.se());
  CHECK(std::abs(s3s.mean - 2.0) < 3 * s3s.se());
  CHECK(std::abs(std::sqrt(s3s.m2 / (s3s.n - 1)) - 3.0) < 0.01);
  CHECK(std::abs(y3.mean - 10.0) < 3 * y3.se());
}

TEST_CASE("generated studies are ordered, bounded and reproducible") {
  Philox4x32 a(9, 123), b(9, 123);
  const Study x = generate_study(2, 30, 20, a);
  const Study y = generate_study(2, 30, 20, b);
  REQUIRE(x.size() == 50);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x.subjects()[i].arm == (i < 30 ? 1 : 0));
    CHECK(x.subjects()[i].w >= 0.0);
    CHECK(x.subjects()[i].w < 10.0);
    CHECK(*x.subjects()[i].y == *y.subjects()[i].y);
  }
}

TEST_CASE("masking follows region membership") {
  Philox4x32 rng(3, 4);
  const Study full = generate_study(1, 40, 40, rng);
  const SurrogacyRegion r(0.5, {{5.0, 10.0}}, Range{0.0, 10.0});
  const Study b = mask_study_b(full, r);
  CHECK(b.role() == Role::B);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Subject& m = b.subjects()[i];
    const Subject& f = full.subjects()[i];
    if (f.w >= 5.0) {
      CHECK(*m.delta == 1);
      CHECK(*m.s == *f.s);
      CHECK_FALSE(m.y.has_value());
    } else {
      CHECK(*m.delta == 0);
      CHECK(*m.y == *f.y);
      CHECK_FALSE(m.s.has_value());
    }
  }
}

TEST_CASE("setting validation") {
  SettingSpec s = small_spec(1);
  s.id = 0;
  CHECK_THROWS_AS(validate(s), UsageError);
  s = small_spec(1);
  s.n_b0 = 9;
  CHECK_THROWS_AS(validate(s), UsageError);
  s = small_spec(1);
  s.kappas = {1.0};
  CHECK_THROWS_AS(validate(s), UsageError);
  s = small_spec(1);
  s.iterations = 0;
  CHECK_THROWS_AS(validate(s), UsageError);
}

TEST_CASE("simulation does not depend on thread count") {
  const SettingSpec spec = small_spec(1);
  const std::size_t saved = max_threads();
  set_max_threads(1);
  const SimulationReport one = run_simulation(spec);
  set_max_threads(4);
  std::size_t last = 0;
  const SimulationReport four = run_simulation(spec, [&](std::size_t done, std::size_t total) {
    CHECK(total == spec.iterations);
    last = std::max(last, done);
  });
  set_max_threads(saved);
  CHECK(last == spec.iterations);
  REQUIRE(one.rows.size() == 4);
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(one.rows[i].mean_estimate == four.rows[i].mean_estimate);
    CHECK(one.rows[i].ese == four.rows[i].ese);
    CHECK(one.rows[i].rejection_rate == four.rows[i].rejection_rate);
  }
  std::ostringstream a, b;
  write_simulation_report(one, a);
  write_simulation_report(four, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind(
            "setting,estimator,kappa,mean_estimate,ese,ase,effect_size,rejection_rate,pi_b_true\n"
            "1,delta_b,NA,",
            0) == 0);
}

TEST_CASE("report rows and a single iteration") {
  SettingSpec spec = small_spec(2);
  spec.iterations = 1;
  const SimulationReport r = run_simulation(spec);
  CHECK(std::isnan(r.row("delta_b").ese));
  CHECK(r.row("delta_p", 0.7).kappa == 0.7);
  CHECK(r.row("delta_p", 0.5).pi_b_true.has_value());
  CHECK_FALSE(r.row("delta_ab").pi_b_true.has_value());
  CHECK_THROWS_AS(r.row("delta_p", 0.9), UsageError);
  std::ostringstream out;
  write_simulation_report(r, out);
  CHECK(out.str().find("2,delta_b,NA,") != std::string::npos);
}

TEST_CASE("design check rows") {
  const SettingSpec spec = small_spec(1);
  const SimulationReport r = run_simulation(spec);
  const auto rows = run_design_check(spec, r);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.estimated_power > 0.0);
    CHECK(row.estimated_power < 1.0);
    CHECK(row.empirical_power == r.row("delta_p", row.kappa).rejection_rate);
  }
  std::ostringstream out;
  write_design_check(rows, out);
  CHECK(out.str().rfind("setting,kappa,estimated_power,empirical_power\n1,0.5,", 0) == 0);
}

}
