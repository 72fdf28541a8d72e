// etsi: command-line front end.
//
// Exit codes: 0 ok, 1 usage, 2 data validation, 3 numerical failure.
// CSV goes to --out; one key=value summary line goes to stdout; simulation
// progress goes to stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "etsi/design.hpp"
#include "etsi/errors.hpp"
#include "etsi/parallel.hpp"
#include "etsi/pooled_test.hpp"
#include "etsi/pte.hpp"
#include "etsi/sim_lab.hpp"
#include "etsi/trial_data.hpp"

namespace {

using namespace etsi;

constexpr std::uint64_t kDefaultSeed = 12345;

struct Common {
  std::size_t threads = 0;
};

struct PteArgs {
  std::string study_a;
  std::size_t grid_size = 100;
  std::optional<double> bandwidth;
  std::string rule = "rot";
};

struct PteCmd {
  PteArgs pte;
  std::string out;
};

struct RegionCmd {
  PteArgs pte;
  std::vector<double> kappas;
  std::string out;
};

struct TestCmd {
  PteArgs pte;
  std::string study_b;
  double kappa = 0.5;
  double alpha = 0.05;
  std::string out;
};

struct DesignCmd {
  PteArgs pte;
  std::vector<double> kappas;
  std::vector<double> psis;
  std::vector<std::size_t> n_totals;
  std::optional<double> beta;
  std::optional<double> pi_b;
  std::size_t iterations = 100;
  double holdout = 0.5;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

struct SimulateCmd {
  int setting = 1;
  std::size_t iterations = 1000;
  std::uint64_t seed = kDefaultSeed;
  std::vector<double> kappas{0.5, 0.6, 0.7};
  std::size_t gcv_iterations = 100;
  std::string out;
  std::string design_out;
  bool quiet = false;
};

struct GenerateCmd {
  int setting = 1;
  std::size_t n1 = 500;
  std::size_t n0 = 400;
  std::uint64_t seed = kDefaultSeed;
  std::uint64_t stream = 0;
  std::string mask_with;
  double kappa = 0.5;
  std::string out;
};

void add_pte_options(CLI::App* cmd, PteArgs& a) {
  cmd->add_option("--study-a", a.study_a, "Study A CSV (arm,w,s,y)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--grid-size", a.grid_size, "PTE grid points")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
  cmd->add_option("--bandwidth", a.bandwidth, "Covariate bandwidth for the PTE smoothers")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--bandwidth-rule", a.rule,
                  "rot: rule of thumb; etsi: rule of thumb times n0^(-1/5)")
      ->capture_default_str()
      ->check(CLI::IsMember({"rot", "etsi"}));
}

PteOptions pte_options(const PteArgs& a) {
  PteOptions o;
  o.grid_size = a.grid_size;
  o.bandwidth_override = a.bandwidth;
  o.rule = a.rule == "etsi" ? PteBandwidthRule::etsi : PteBandwidthRule::rule_of_thumb;
  return o;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

void check_kappa(double k) {
  if (!(k > 0.0 && k < 1.0)) throw UsageError("kappa must lie strictly between 0 and 1");
}

int run_pte(const PteCmd& c) {
  const Study a = load_study(c.pte.study_a, Role::A);
  const PteCurve curve = estimate_pte(a, pte_options(c.pte));
  auto out = open_out(c.out);
  write_curve(curve, out);
  std::cout << "grid_size=" << curve.size() << " defined=" << curve.defined_count()
            << " h_w=" << format_number(curve.bandwidths.w)
            << " h_s=" << format_number(curve.bandwidths.s) << '\n';
  return 0;
}

int run_region(const RegionCmd& c) {
  for (double k : c.kappas) check_kappa(k);
  const Study a = load_study(c.pte.study_a, Role::A);
  const PteCurve curve = estimate_pte(a, pte_options(c.pte));
  auto out = open_out(c.out);
  write_region_header(out);
  for (double k : c.kappas) {
    const SurrogacyRegion region = build_region(curve, k);
    write_region_rows(region, out);
    const StudySummary s = summarize(a, [&](double w) { return region.contains(w); });
    const double pi_a = static_cast<double>(*s.arms[0].n_inside + *s.arms[1].n_inside) /
                        static_cast<double>(a.size());
    std::cout << "kappa=" << format_number(k) << " intervals=" << region.intervals().size()
              << " measure=" << format_number(region.measure())
              << " pi_a=" << format_number(pi_a) << '\n';
  }
  return 0;
}

int run_test(const TestCmd& c) {
  check_kappa(c.kappa);
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) {
    throw UsageError("alpha must lie strictly between 0 and 1");
  }
  const Study a = load_study(c.pte.study_a, Role::A);
  const std::optional<Role> role_b = detect_role(c.study_b);
  if (!role_b) {
    throw SchemaError(c.study_b + ": header matches neither arm,w,delta,s,y nor arm,w,s,y");
  }
  const Study b_file = load_study(c.study_b, *role_b);

  const PteCurve curve = estimate_pte(a, pte_options(c.pte));
  const SurrogacyRegion region = build_region(curve, c.kappa);
  // A fully observed file is masked here so all three estimators can run.
  const Study b = *role_b == Role::A ? mask_study_b(b_file, region) : b_file;

  std::size_t flagged = 0;
  for (const Subject& s : b.subjects()) flagged += *s.delta == 1 ? 1 : 0;
  if (region.empty() && flagged > 0) {
    throw ValidationError(c.study_b + ": " + std::to_string(flagged) +
                          " subjects have delta=1 but the region at kappa=" +
                          format_number(c.kappa) + " is empty");
  }
  std::vector<double> imputed;
  if (flagged > 0) imputed = impute(fit_nu_a0(a, region), b);

  auto out = open_out(c.out);
  write_test_header(out);
  const TestResult p = pooled_test(b, imputed, c.alpha);
  write_test_row(out, "delta_p", c.kappa, p);
  const Study& full = b_file;
  if (full.has_full_outcome()) write_test_row(out, "delta_b", std::nullopt, delta_b_hat(full, c.alpha));
  if (full.has_full_surrogate()) {
    write_test_row(out, "delta_ab", std::nullopt, delta_ab_hat(fit_mu_a0(a), full, c.alpha));
  }
  std::cout << "kappa=" << format_number(c.kappa) << " estimate=" << format_number(p.estimate)
            << " se=" << format_number(p.se) << " z=" << format_number(p.wald.z)
            << " p=" << format_number(p.wald.p_value) << " reject=" << (p.wald.reject ? 1 : 0)
            << " pi_b1=" << format_number(p.components.arm[1].pi_hat)
            << " pi_b0=" << format_number(p.components.arm[0].pi_hat) << '\n';
  return 0;
}

GcvOptions gcv_options(const DesignCmd& c) {
  GcvOptions g;
  g.iterations = c.iterations;
  g.holdout = c.holdout;
  g.seed = c.seed;
  return g;
}

DesignEstimates single_design(const DesignCmd& c, const Study& a, double& pi_b) {
  if (c.kappas.size() != 1) throw UsageError("give exactly one --kappa");
  check_kappa(c.kappas[0]);
  const PteCurve curve = estimate_pte(a, pte_options(c.pte));
  const DesignEstimates est = gcv_design(a, build_region(curve, c.kappas[0]), gcv_options(c));
  pi_b = c.pi_b ? *c.pi_b : est.pi_a;
  return est;
}

void emit(const std::string& line, const std::string& out_path) {
  std::cout << line << '\n';
  if (!out_path.empty()) open_out(out_path) << line << '\n';
}

int run_design_power(const DesignCmd& c) {
  if (c.psis.size() != 1 || c.n_totals.size() != 1) {
    throw UsageError("give exactly one --psi and one --n-total");
  }
  const Study a = load_study(c.pte.study_a, Role::A);
  double pi_b = 0.0;
  const DesignEstimates est = single_design(c, a, pi_b);
  const std::size_t n = c.n_totals[0];
  PowerQuery q;
  q.n1 = static_cast<double>(n - n / 2);
  q.n0 = static_cast<double>(n / 2);
  q.psi = c.psis[0];
  q.pi_b = pi_b;
  const double power = expected_power(est, q);
  std::ostringstream line;
  line << "kappa=" << format_number(c.kappas[0]) << " psi=" << format_number(q.psi)
       << " n_total=" << n << " pi_b=" << format_number(pi_b)
       << " tau=" << format_number(est.tau) << " rho=" << format_number(est.rho)
       << " power=" << format_number(power);
  emit(line.str(), c.out);
  return 0;
}

int run_design_n(const DesignCmd& c) {
  if (c.psis.size() != 1) throw UsageError("give exactly one --psi");
  if (!c.beta) throw UsageError("--beta is required");
  const Study a = load_study(c.pte.study_a, Role::A);
  double pi_b = 0.0;
  const DesignEstimates est = single_design(c, a, pi_b);
  const RequiredN r = required_n(est, c.psis[0], pi_b, *c.beta);
  std::ostringstream line;
  line << "kappa=" << format_number(c.kappas[0]) << " psi=" << format_number(c.psis[0])
       << " beta=" << format_number(*c.beta) << " pi_b=" << format_number(pi_b)
       << " n_per_arm=" << format_number(r.n) << " n_per_arm_ceil=" << r.n_ceil
       << " n_total=" << 2 * r.n_ceil;
  emit(line.str(), c.out);
  return 0;
}

int run_design_grid(const DesignCmd& c) {
  if (c.out.empty()) throw UsageError("--out is required for the grid");
  if (c.pi_b) throw UsageError("the grid uses each region's Study A fraction; drop --pi-b");
  for (double k : c.kappas) check_kappa(k);
  const Study a = load_study(c.pte.study_a, Role::A);
  const PteCurve curve = estimate_pte(a, pte_options(c.pte));
  const auto rows = power_grid(a, curve, c.kappas, c.psis, c.n_totals, gcv_options(c));
  auto out = open_out(c.out);
  write_power_grid(rows, out);
  std::cout << "rows=" << rows.size() << " kappas=" << c.kappas.size() << '\n';
  return 0;
}

std::string default_design_path(const std::string& out) {
  std::filesystem::path p(out);
  const std::string ext = p.has_extension() ? p.extension().string() : std::string(".csv");
  p.replace_extension();
  return p.string() + "_design" + ext;
}

int run_simulate(const SimulateCmd& c) {
  SettingSpec spec;
  spec.id = c.setting;
  spec.iterations = c.iterations;
  spec.seed = c.seed;
  spec.kappas = c.kappas;
  spec.gcv_iterations = c.gcv_iterations;
  validate(spec);

  ProgressFn progress;
  if (!c.quiet) {
    progress = [](std::size_t done, std::size_t total) {
      if (done == total || done % 50 == 0) {
        std::cerr << "\rsimulate: " << done << '/' << total << (done == total ? "\n" : "")
                  << std::flush;
      }
    };
  }
  const SimulationReport report = run_simulation(spec, progress);
  for (const EstimatorSummary& row : report.rows) {
    if (row.undefined == 0) continue;
    std::cerr << "etsi simulate: warning: " << row.estimator << " kappa="
              << (row.kappa ? format_number(*row.kappa) : std::string("NA")) << ": "
              << row.undefined << " of " << c.iterations
              << " iterations left out (single-subject stratum, variance undefined)\n";
  }
  const auto design = run_design_check(spec, report);

  {
    auto out = open_out(c.out);
    write_simulation_report(report, out);
  }
  const std::string design_path = c.design_out.empty() ? default_design_path(c.out) : c.design_out;
  {
    auto out = open_out(design_path);
    write_design_check(design, out);
  }
  std::cout << "setting=" << c.setting << " iterations=" << c.iterations << " seed=" << c.seed
            << " delta_b_mean=" << format_number(report.row("delta_b").mean_estimate)
            << " table=" << c.out << " design=" << design_path << '\n';
  return 0;
}

int run_generate(const GenerateCmd& c) {
  Philox4x32 rng(c.seed, stream_id(stream_domain::generate, c.stream));
  const Study full = generate_study(c.setting, c.n1, c.n0, rng);
  if (c.mask_with.empty()) {
    write_study(full, c.out);
  } else {
    check_kappa(c.kappa);
    const Study a = load_study(c.mask_with, Role::A);
    write_study(mask_study_b(full, build_region(estimate_pte(a), c.kappa)), c.out);
  }
  std::cout << "setting=" << c.setting << " n1=" << c.n1 << " n0=" << c.n0 << " seed=" << c.seed
            << " stream=" << c.stream << " out=" << c.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Purposeful surrogate-only measurement: PTE heterogeneity, pooled testing, design"};
  app.set_version_flag("--version", "etsi 1.0.0");
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker cap (0 = one per hardware thread)")
      ->capture_default_str();

  PteCmd pte;
  auto* c_pte = app.add_subcommand("pte", "Estimate the R_S(w) curve and write it as CSV");
  add_pte_options(c_pte, pte.pte);
  c_pte->add_option("--out", pte.out, "Curve CSV")->required();

  RegionCmd region;
  auto* c_region = app.add_subcommand("region", "Threshold the curve into intervals");
  add_pte_options(c_region, region.pte);
  c_region->add_option("--kappa", region.kappas, "Threshold(s) in (0,1)")->required();
  c_region->add_option("--out", region.out, "Region CSV")->required();

  TestCmd test;
  auto* c_test = app.add_subcommand("test", "Pooled Wald test on a Study B file");
  add_pte_options(c_test, test.pte);
  c_test->add_option("--study-b", test.study_b, "Study B CSV")->required()->check(CLI::ExistingFile);
  c_test->add_option("--kappa", test.kappa, "Threshold in (0,1)")->required();
  c_test->add_option("--alpha", test.alpha, "Two-sided level")->capture_default_str();
  c_test->add_option("--out", test.out, "Test report CSV")->required();

  DesignCmd design;
  auto* c_design = app.add_subcommand("design", "Power, sample size and power grids");
  c_design->require_subcommand(1);
  auto add_design = [&](CLI::App* cmd) {
    add_pte_options(cmd, design.pte);
    cmd->add_option("--kappa", design.kappas, "Threshold(s) in (0,1)")->required();
    cmd->add_option("--iterations", design.iterations, "GCV splits")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--holdout", design.holdout, "Evaluation share of each split")
        ->capture_default_str();
    cmd->add_option("--seed", design.seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", design.out, "Report file");
  };
  auto* c_power = c_design->add_subcommand("power", "Expected power of a planned Study B");
  add_design(c_power);
  c_power->add_option("--psi", design.psis, "Alternative effect")->required();
  c_power->add_option("--n-total", design.n_totals, "Planned total size")->required();
  c_power->add_option("--pi-b", design.pi_b, "Planned region fraction (default: Study A's)");
  auto* c_n = c_design->add_subcommand("n", "Per-arm size for power 1 - beta");
  add_design(c_n);
  c_n->add_option("--psi", design.psis, "Alternative effect")->required();
  c_n->add_option("--beta", design.beta, "Type II error")->required();
  c_n->add_option("--pi-b", design.pi_b, "Planned region fraction (default: Study A's)");
  auto* c_grid = c_design->add_subcommand("grid", "Power over kappa x psi x n_total");
  add_design(c_grid);
  c_grid->add_option("--psi", design.psis, "Alternative effects")->required();
  c_grid->add_option("--n-total", design.n_totals, "Total sizes")->required();

  SimulateCmd sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo study on a synthetic setting");
  c_sim->add_option("--setting", sim.setting, "1, 2 or 3")
      ->required()
      ->check(CLI::IsMember({1, 2, 3}));
  c_sim->add_option("--iterations", sim.iterations, "Study B replications")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--kappas", sim.kappas, "Thresholds")->capture_default_str();
  c_sim->add_option("--gcv-iterations", sim.gcv_iterations, "GCV splits for the design check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_sim->add_option("--out", sim.out, "Estimator table CSV")->required();
  c_sim->add_option("--design-out", sim.design_out,
                    "Estimated vs empirical power CSV (default: <out>_design.csv)");
  c_sim->add_flag("--quiet", sim.quiet, "No progress on stderr");

  GenerateCmd gen;
  auto* c_gen = app.add_subcommand("generate", "Write a synthetic study");
  c_gen->add_option("--setting", gen.setting, "1, 2 or 3")
      ->required()
      ->check(CLI::IsMember({1, 2, 3}));
  c_gen->add_option("--n1", gen.n1, "Arm 1 size")->capture_default_str()->check(CLI::PositiveNumber);
  c_gen->add_option("--n0", gen.n0, "Arm 0 size")->capture_default_str()->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  c_gen->add_option("--stream", gen.stream, "Stream index under the seed")->capture_default_str();
  c_gen->add_option("--mask-with", gen.mask_with,
                    "Study A file; write a masked Study B using its region")
      ->check(CLI::ExistingFile);
  c_gen->add_option("--kappa", gen.kappa, "Threshold for --mask-with")->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    set_max_threads(common.threads);
    if (*c_pte) return run_pte(pte);
    if (*c_region) return run_region(region);
    if (*c_test) return run_test(test);
    if (*c_power) return run_design_power(design);
    if (*c_n) return run_design_n(design);
    if (*c_grid) return run_design_grid(design);
    if (*c_sim) return run_simulate(sim);
    if (*c_gen) return run_generate(gen);
  } catch (const UsageError& e) {
    std::cerr << "etsi " << stage << ": usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "etsi " << stage << ": data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "etsi " << stage << ": numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "etsi " << stage << ": error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
