// Command-line front end: build, verify, sweep, constants, selftest.
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fineapprox/assemble.hpp"
#include "fineapprox/bumps1d.hpp"
#include "fineapprox/error.hpp"
#include "fineapprox/mollify.hpp"
#include "fineapprox/smoothsup.hpp"
#include "fineapprox/verify.hpp"

using namespace fineapprox;
using nlohmann::json;

namespace {

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + cell + "'");
    }
    if (used != cell.size()) throw ConfigError("not a number: '" + cell + "'");
    out.push_back(v);
  }
  return out;
}

Box parse_box(const std::string& s, int d) {
  const auto v = parse_list(s);
  Box box;
  if (v.size() == 2) {
    box.assign(d, Interval{v[0], v[1]});
  } else if (static_cast<int>(v.size()) == 2 * d) {
    for (int i = 0; i < d; ++i) box.push_back({v[2 * i], v[2 * i + 1]});
  } else {
    throw ConfigError("--box needs 2 or 2d comma-separated values");
  }
  return box;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

// Build flags shared by build, verify and sweep.
struct BuildFlags {
  std::string config_path;
  std::string function;
  int dim = 0;
  std::string box;
  double eps = 0.0;
  std::string mode;
  std::string form;
  int half_degree = 0;
  std::string ordering;
  std::size_t max_centers = 0;
  double a1_target = 0.0;
  double c0 = 0.0;
  std::uint64_t qmc_key = 0;
  std::uint64_t delta_key = 0;
  double rho = 0.0;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON build config; flags override it");
    app->add_option("--function", function, "corpus function name");
    app->add_option("--dim", dim, "dimension");
    app->add_option("--box", box, "lo,hi (all axes) or lo1,hi1,...,lod,hid");
    app->add_option("--epsilon", eps, "target C1 tolerance");
    app->add_option("--mode", mode, "practical | paper");
    app->add_option("--form", form, "euclidean_power | even_power_sum");
    app->add_option("--half-degree", half_degree, "n in q of degree 2n");
    app->add_option("--ordering", ordering, "center_out | lexicographic");
    app->add_option("--max-centers", max_centers, "center budget (practical mode)");
    app->add_option("--a1-target", a1_target, "smooth-sup norm constant target");
    app->add_option("--C0", c0, "mollifier constant C0");
    app->add_option("--qmc-key", qmc_key, "Sobol shift key for the partition");
    app->add_option("--delta-key", delta_key, "Sobol shift key for the patch smoothing");
    app->add_option("--rho", rho, "override rho");
  }

  bool given(CLI::App* app, const char* name) const { return app->get_option(name)->count() > 0; }

  BuildConfig resolve(CLI::App* app) const {
    BuildConfig c = config_path.empty() ? BuildConfig{} : BuildConfig::from_json(read_json(config_path));
    if (given(app, "--function")) c.function = function;
    if (given(app, "--dim")) {
      c.dim = dim;
      if (!given(app, "--box") && static_cast<int>(c.box.size()) != dim) {
        c.box.assign(dim, c.box.empty() ? Interval{-1.0, 1.0} : c.box.front());
      }
    }
    if (given(app, "--box")) c.box = parse_box(box, c.dim);
    if (given(app, "--epsilon")) c.eps = eps;
    if (given(app, "--mode")) c.mode = constant_mode_from_string(mode);
    if (given(app, "--form")) c.form = form_kind_from_string(form);
    if (given(app, "--half-degree")) c.half_degree = half_degree;
    if (given(app, "--ordering")) c.ordering = ordering_from_string(ordering);
    if (given(app, "--max-centers")) c.max_centers = max_centers;
    if (given(app, "--a1-target")) c.a1_target = a1_target;
    if (given(app, "--C0")) c.c0 = c0;
    if (given(app, "--qmc-key")) c.qmc_key = qmc_key;
    if (given(app, "--delta-key")) c.delta_key = delta_key;
    if (given(app, "--rho")) c.rho_override = rho;
    return c;
  }
};

struct VerifyFlags {
  std::size_t grid = 0;
  std::size_t fd_points = 100;
  double budget = 600.0;

  void attach(CLI::App* app) {
    app->add_option("--grid", grid, "grid points per axis (default 2000 for d=1, 200 for d=2)");
    app->add_option("--fd-points", fd_points, "finite-difference check points");
    app->add_option("--budget", budget, "wall-clock budget in seconds");
  }
  VerifyOptions options() const {
    VerifyOptions o;
    o.grid_per_axis = grid;
    o.fd_points = fd_points;
    o.budget_seconds = budget;
    return o;
  }
};

void print_summary(const json& rep) {
  const auto& m = rep["metrics"];
  std::printf("sup|f-g|   = %.6g (bound %.6g)\n", m["sup_abs_err"]["value"].get<double>(),
              m["sup_abs_err"]["bound"].get<double>());
  std::printf("sup|f'-g'| = %.6g (bound %.6g)\n", m["sup_grad_err"]["value"].get<double>(),
              m["sup_grad_err"]["bound"].get<double>());
  std::printf("fd check   = %.3g\n", rep["fd_check"]["max_rel_err"].get<double>());
  std::printf("result     = %s\n", rep["pass"].get<bool>() ? "pass" : "FAIL");
}

int run_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const char* what) {
    std::printf("%s %s\n", ok ? "ok  " : "FAIL", what);
    if (!ok) ++failures;
  };
  const double v34[] = {3.0, 4.0};
  check(std::abs(smooth_sup_norm(v34, 1) - 5.0) < 1e-14, "smooth sup of (3,4) with m=1 is 5");
  check(smooth_sup_degree(16, 1.1) == 15, "smooth sup degree for N=16, A1=1.1");
  check(std::abs(gauss_normalizer(2, std::numbers::pi) - 2.0 * std::sqrt(2.0)) < 1e-12,
        "Gaussian normalizer n=2, k=pi");
  const auto led = compute_constants(ConstantMode::paper, 1.0, 1.0, 1.0, 15.0 / 8.0, 1.0, 1.1,
                                     0.05, nubar_lipschitz(0.05));
  check(std::abs(led.eps_prime - 0.99 / (132.0 * 1.21 * 1.875)) < 1e-12, "paper-mode eps'");
  BuildConfig c;
  c.function = "sin1d";
  const Approximant a = Approximant::build(c);
  VerifyOptions o;
  o.grid_per_axis = 200;
  o.fd_points = 10;
  o.envelope_probes = 100;
  const VerifyResult r = verify(a, o);
  check(r.pass, "sin1d end-to-end at eps=0.25 on a 200-point grid");
  return failures ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constructive C1-fine smooth approximation"};
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build", "build an approximant and write it as JSON");
  BuildFlags build_flags;
  build_flags.attach(build);
  std::string out_path;
  build->add_option("--out", out_path, "output path")->required();

  auto* verify_cmd = app.add_subcommand("verify", "verify an approximant on a grid");
  BuildFlags verify_build;
  verify_build.attach(verify_cmd);
  VerifyFlags verify_flags;
  verify_flags.attach(verify_cmd);
  std::string appr_path, report_path, csv_path;
  verify_cmd->add_option("--approximant", appr_path, "approximant JSON (otherwise build from flags)");
  verify_cmd->add_option("--report", report_path, "report JSON path");
  verify_cmd->add_option("--csv", csv_path, "sample CSV path");

  auto* sweep_cmd = app.add_subcommand("sweep", "build and verify for several epsilons");
  BuildFlags sweep_build;
  sweep_build.attach(sweep_cmd);
  VerifyFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string eps_list, sweep_csv;
  sweep_cmd->add_option("--eps-list", eps_list, "comma-separated decreasing epsilons")->required();
  sweep_cmd->add_option("--csv", sweep_csv, "output CSV path");

  auto* constants = app.add_subcommand("constants", "print the constants ledger");
  std::string c_mode = "paper";
  double c_eps = 1.0, c_c0 = 1.0, c_a1 = 1.1, c_l1 = 15.0 / 8.0, c_lipq = 1.0, c_r = 0.05,
         c_l = 1.0, c_lipnu = 0.0;
  constants->add_option("--mode", c_mode, "practical | paper");
  constants->add_option("--epsilon", c_eps, "target tolerance");
  constants->add_option("--C0", c_c0);
  constants->add_option("--A1", c_a1);
  constants->add_option("--L1", c_l1);
  constants->add_option("--lipQ", c_lipq);
  constants->add_option("--r", c_r);
  constants->add_option("--L", c_l, "Lipschitz constant of f");
  constants->add_option("--lip-nubar", c_lipnu, "Lipschitz constant of nubar (default 15/(4r))");

  auto* selftest = app.add_subcommand("selftest", "quick internal consistency run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (build->parsed()) {
      const BuildConfig cfg = build_flags.resolve(build);
      const Approximant a = Approximant::build(cfg);
      write_json(out_path, a.to_json());
      std::printf("wrote %s (%zu centers)\n", out_path.c_str(),
                  a.is_constant() ? std::size_t{0} : a.covering().size());
      return 0;
    }
    if (verify_cmd->parsed()) {
      if (appr_path.empty()) {
        // A tolerance the builder cannot certify is a failed verification.
        const BuildConfig cfg = verify_build.resolve(verify_cmd);
        try {
          const Approximant a = Approximant::build(cfg);
          const VerifyResult r = verify(a, verify_flags.options());
          if (!report_path.empty()) write_json(report_path, r.report);
          if (!csv_path.empty()) write_csv(csv_path, r.rows);
          print_summary(r.report);
          return r.pass ? 0 : 1;
        } catch (const InfeasibleError& e) {
          const json rep = {{"schema", "fineapprox-report/1"},
                            {"config", cfg.to_json()},
                            {"build_error", e.what()},
                            {"pass", false}};
          if (!report_path.empty()) write_json(report_path, rep);
          std::printf("FAIL: build could not meet the tolerance: %s\n", e.what());
          return 1;
        }
      }
      const Approximant a = Approximant::from_json(read_json(appr_path));
      const VerifyResult r = verify(a, verify_flags.options());
      if (!report_path.empty()) write_json(report_path, r.report);
      if (!csv_path.empty()) write_csv(csv_path, r.rows);
      print_summary(r.report);
      return r.pass ? 0 : 1;
    }
    if (sweep_cmd->parsed()) {
      const auto rows = sweep(sweep_build.resolve(sweep_cmd), parse_list(eps_list),
                              sweep_flags.options());
      if (!sweep_csv.empty()) write_sweep_csv(sweep_csv, rows);
      bool all = true;
      for (const auto& r : rows) {
        std::printf("eps=%g sup|f-g|=%.6g sup|f'-g'|=%.6g N=%zu %.2fs\n", r.eps, r.sup_abs_err,
                    r.sup_grad_err, r.centers, r.runtime);
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
    if (constants->parsed()) {
      const double lipnu = c_lipnu > 0.0 ? c_lipnu : nubar_lipschitz(c_r);
      const auto led = compute_constants(constant_mode_from_string(c_mode), c_eps, c_l, c_lipq,
                                         c_l1, c_c0, c_a1, c_r, lipnu);
      std::printf("%s\n", led.to_json().dump(2).c_str());
      return 0;
    }
    if (selftest->parsed()) return run_selftest();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const ContractViolation& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const InfeasibleError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
