#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "fineapprox/corpus.hpp"
#include "fineapprox/error.hpp"
#include "fineapprox/verify.hpp"

using namespace fineapprox;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("fineapprox_harness_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FINEAPPROX_CLI) + " " + args + " > " +
                          (scratch() / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json load(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("corpus members satisfy their certified constants") {
  CHECK(corpus().size() >= 5);
  CHECK_THROWS_AS(corpus_lookup("missing"), ConfigError);
  std::mt19937_64 rng(81);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (const auto& cf : corpus()) {
    for (int d : {1, 2, 3}) {
      if (cf.dim != 0 && cf.dim != d) {
        CHECK_THROWS_AS(cf.target(d), ConfigError);
        continue;
      }
      INFO(cf.name << " d=" << d);
      auto f = cf.target(d);
      Vec x(d), y(d), gx(d), gy(d);
      for (int i = 0; i < 10000; ++i) {
        for (int j = 0; j < d; ++j) {
          x[j] = u(rng);
          y[j] = x[j] + 0.1 * u(rng);
        }
        const double fx = f.value_grad(x, gx);
        const double fy = f.value_grad(y, gy);
        REQUIRE(fx >= cf.f_min);
        REQUIRE(fx <= cf.f_max);
        Vec diff(d), gdiff(d);
        for (int j = 0; j < d; ++j) {
          diff[j] = x[j] - y[j];
          gdiff[j] = gx[j] - gy[j];
        }
        const double dist = euclidean_norm(diff);
        REQUIRE(euclidean_norm(gx) <= cf.lip * (1 + 1e-6) + 1e-15);
        if (dist > 0.0) {
          REQUIRE(std::abs(fx - fy) <= cf.lip * dist * (1 + 1e-6) + 1e-15);
          REQUIRE(euclidean_norm(gdiff) <= cf.m2 * dist * (1 + 1e-6) + 1e-15);
        }
      }
      for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < d; ++j) x[j] = u(rng);
        f.value_grad(x, gx);
        for (int j = 0; j < d; ++j) {
          Vec a = x, b = x;
          a[j] += 1e-6;
          b[j] -= 1e-6;
          const double fd = (f.value(a) - f.value(b)) / 2e-6;
          REQUIRE(std::abs(fd - gx[j]) <= 1e-7);
        }
      }
    }
  }
  const auto& s = corpus_lookup("sin1d");
  Vec g(1);
  s.target(1).value_grad(Vec{0.0}, g);
  CHECK(g[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(s.lip == 0.8);
  CHECK(s.m2 == 1.6);
  CHECK(corpus_lookup("constant").m2 == 0.0);
}

TEST_CASE("verification report, CSV round trip, determinism") {
  BuildConfig cfg;
  const auto a = Approximant::build(cfg);
  VerifyOptions opt;
  opt.grid_per_axis = 300;
  const auto res = verify(a, opt);
  const auto& rep = res.report;
  CHECK(res.pass);
  CHECK(rep["schema"] == "fineapprox-report/1");
  CHECK(rep["gradient_norm"] == "euclidean");
  for (const char* key : {"config", "ledger", "normalization", "grid", "qmc_keys", "metrics", "fd_check", "lemma",
                          "floors", "diagnostics", "tail", "envelopes", "nu", "runtime"}) {
    CHECK(rep.contains(key));
  }
  for (const char* key : {"case1_inside_body", "case2_outside_body", "taylor_cutoff", "lipschitz_chain",
                          "value_error_total", "gradient_error_total"}) {
    CHECK(rep["diagnostics"].contains(key));
  }
  CHECK(rep["floors"]["numerator_violations"] == 0);
  CHECK(rep["floors"]["denominator_violations"] == 0);
  CHECK(res.rows.size() == 300);

  const auto path = (scratch() / "samples.csv").string();
  write_csv(path, res.rows);
  const auto rows = read_csv(path);
  REQUIRE(rows.size() == res.rows.size());
  double sup_abs = 0.0, sup_grad = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].x == res.rows[i].x);
    CHECK(rows[i].g == res.rows[i].g);
    sup_abs = std::max(sup_abs, std::abs(rows[i].f - rows[i].g));
    sup_grad = std::max(sup_grad, rows[i].grad_err);
  }
  CHECK(sup_abs == doctest::Approx(rep["metrics"]["sup_abs_err"]["value"].get<double>()).epsilon(1e-12));
  CHECK(sup_grad == rep["metrics"]["sup_grad_err"]["value"].get<double>());
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,f,g,abs_err,grad_err");

  const auto again = verify(Approximant::build(cfg), opt);
  CHECK(strip_timing(again.report).dump() == strip_timing(rep).dump());
  CHECK_FALSE(strip_timing(rep).contains("runtime"));
}

TEST_CASE("verification preconditions") {
  BuildConfig cfg;
  const auto a = Approximant::build(cfg);
  VerifyOptions opt;
  opt.grid_per_axis = 1;
  CHECK_THROWS_AS(verify(a, opt), ContractViolation);
  CHECK(make_grid(Box{{0, 1}, {2, 2}}, 5).size() == 5);
  CHECK(default_grid_per_axis(1) == 2000);
  CHECK(default_grid_per_axis(2) == 200);
}

TEST_CASE("sweeps") {
  BuildConfig cfg;
  VerifyOptions opt;
  opt.grid_per_axis = 200;
  const auto rows = sweep(cfg, {0.5, 0.25}, opt);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].eps == 0.5);
  CHECK(rows[1].eps == 0.25);
  CHECK(rows[0].pass);
  CHECK(rows[1].pass);
  CHECK(rows[1].centers >= rows[0].centers);
  CHECK(rows[1].sup_abs_err <= std::max(rows[0].sup_abs_err, 1e-12));
  CHECK(rows[1].sup_grad_err <= std::max(rows[0].sup_grad_err, 1e-10));
  CHECK(sweep(cfg, {0.5}, opt).size() == 1);
  CHECK_THROWS_AS(sweep(cfg, {}, opt), ContractViolation);
  CHECK_THROWS_AS(sweep(cfg, {0.25, 0.5}, opt), ContractViolation);
  const auto path = (scratch() / "sweep.csv").string();
  write_sweep_csv(path, rows);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epsilon,sup_abs_err,sup_grad_err,centers,runtime");
}

TEST_CASE("command line") {
  const auto appr = (scratch() / "appr.json").string();
  const auto report = (scratch() / "report.json").string();
  const auto csv = (scratch() / "samples_cli.csv").string();
  CHECK(run_cli("build --function sin1d --dim 1 --box -1,1 --epsilon 0.25 --mode practical --out " + appr) == 0);
  CHECK(load(appr)["schema"] == "fineapprox/1");
  CHECK(run_cli("verify --approximant " + appr + " --grid 300 --report " + report + " --csv " + csv) == 0);
  CHECK(load(report)["pass"] == true);
  CHECK(read_csv(csv).size() == 300);

  CHECK(run_cli("constants --mode paper --C0 1 --A1 1.1 --L1 1.875 --lipQ 1 --r 0.05") == 0);
  const auto led = load(scratch() / "cli.log");
  CHECK(std::abs(led["eps_prime"].get<double>() - 0.99 / (132.0 * 1.21 * 1.875)) <= 1e-6);

  // Unreachable tolerance: an honest failing report, exit 1.
  const auto fail_report = (scratch() / "fail.json").string();
  CHECK(run_cli("verify --function sin1d --epsilon 1e-9 --grid 200 --report " + fail_report) == 1);
  CHECK(load(fail_report)["pass"] == false);

  CHECK(run_cli("build --function nosuch --out " + appr) == 2);
  CHECK(run_cli("build --function sin1d --mode paper --out " + appr) == 2);
  CHECK(run_cli("build --epsilon 0.25") == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("verify --function sin1d --grid 5") == 2);
  CHECK(run_cli("sweep --function sin1d --eps-list 0.25,0.5") == 2);
}
