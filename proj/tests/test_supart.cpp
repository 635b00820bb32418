#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss.hpp>

#include "fineapprox/error.hpp"
#include "fineapprox/smoothsup.hpp"
#include "fineapprox/supart.hpp"

using namespace fineapprox;

namespace {

Covering small_covering() {
  QFunc q(SeparatingForm::make(FormKind::euclidean_power, 1, 1));
  return build_covering(q, Box{{-0.5, 0.5}}, 0.05, CenterOrdering::center_out);
}

const PhiFamily& family() {
  static const PhiFamily fam = [] {
    PhiOptions opt;
    opt.eps1 = 0.01;
    return PhiFamily(small_covering(), opt);
  }();
  return fam;
}

std::vector<Vec> line_grid(double lo, double hi, int n) {
  std::vector<Vec> g;
  for (int i = 0; i < n; ++i) g.push_back(Vec{lo + (hi - lo) * i / (n - 1.0)});
  return g;
}

}  // namespace

TEST_CASE("family constants") {
  const auto& fam = family();
  const double r = fam.covering().r;
  CHECK(fam.size() == 5);
  CHECK(fam.lipschitz() == doctest::Approx(fam.l1() * fam.covering().qfunc.padded_lipschitz() / r));
  CHECK(fam.lipschitz() > 1.0);
  CHECK(smooth_sup_constant(5, fam.bump_degree()) <= 1.1);
  PhiOptions too_many;
  QFunc q(SeparatingForm::make(FormKind::euclidean_power, 1, 1));
  CHECK_THROWS_AS(PhiFamily(build_covering(q, Box{{-5, 5}}, 0.01, CenterOrdering::center_out), too_many),
                  ConfigError);
}

TEST_CASE("coupled bump plateaus and support") {
  const auto& fam = family();
  const double r = fam.covering().r;
  const double eps1 = fam.eps1();
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const double mk = fam.member(k).mn_bound;
    for (int i = 0; i < 1000; ++i) {
      Vec inside(k + 1), outside(k + 1);
      for (std::size_t j = 0; j < k; ++j) inside[j] = 3 * r + (mk - 2 * r) * u(rng);
      inside[k] = -1.0 + (1.0 + 3 * r) * u(rng);
      REQUIRE(fam.bn_eval(k, inside) == 1.0 + eps1);
      outside = inside;
      // Push one coordinate onto a unit plateau of its profile.
      const std::size_t j = static_cast<std::size_t>(u(rng) * (k + 1)) % (k + 1);
      if (j == k) {
        outside[k] = u(rng) < 0.5 ? 4 * r + u(rng) : -1.0 - r - u(rng);
      } else {
        outside[j] = u(rng) < 0.5 ? 2 * r * u(rng) : mk + 2 * r + u(rng);
      }
      REQUIRE(fam.bn_eval(k, outside) == 0.0);
    }
    Vec far(k + 1, 3.5 * r);
    far[k] = 10.0;
    CHECK(fam.bn_eval(k, far) == 0.0);
  }
  // Transition face with a single nonzero argument: the smooth sup is exact.
  const double mk = fam.member(1).mn_bound;
  for (double t : {3.1, 3.3, 3.5, 3.9}) {
    const Vec y{0.5 * (3 * r + mk + r), t * r};
    const double ref = fam.mu().eval(fam.bhat().eval(t * r));
    const double v = fam.bn_eval(1, y);
    CHECK(v > 0.0);
    CHECK(v <= 1.0 + eps1);
    CHECK(std::abs(v - ref) <= 1e-12);
  }
  CHECK_THROWS_AS(fam.bn_eval(1, Vec{0.0}), ContractViolation);
}

TEST_CASE("bump gradient against finite differences") {
  const auto& fam = family();
  const double r = fam.covering().r;
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + i % 4;
    const double mk = fam.member(k).mn_bound;
    Vec y(k + 1);
    for (std::size_t j = 0; j < k; ++j) y[j] = 1.5 * r + (mk + r) * u(rng);
    y[k] = -1.0 - 1.5 * r + (1.0 + 6 * r) * u(rng);
    Vec g(k + 1);
    fam.bn_grad(k, y, g);
    for (std::size_t j = 0; j <= k; ++j) {
      Vec a = y, b = y;
      a[j] += 1e-8;
      b[j] -= 1e-8;
      const double fd = (fam.bn_eval(k, a) - fam.bn_eval(k, b)) / 2e-8;
      CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, fam.bn_lipschitz()));
    }
  }
}

TEST_CASE("smoothed bump against tensor quadrature in three dimensions") {
  const auto& fam = family();
  const double r = fam.covering().r;
  const std::size_t k = 2;
  const auto& mem = fam.member(k);
  const double mk = mem.mn_bound;
  const Vec y{0.5 * (4 * r + mk), 0.5 * (4 * r + mk), 0.5 * (3 * r - 1.0)};
  auto b = [&](ConstSpan v) { return fam.bn_eval(k, v); };
  const double qmc = mem.expect.value(y, b);
  // Gauss-Legendre over +-9 sigma per axis.
  using GL = boost::math::quadrature::gauss<double, 30>;
  const auto& sig = mem.expect.sigma();
  auto weight = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi); };
  double ref = 0.0;
  const auto& abs_ = GL::abscissa();
  const auto& w = GL::weights();
  // Even order: the abscissae are the positive nodes, mirrored below.
  const int half = static_cast<int>(abs_.size());
  auto node = [&](int i, double& z, double& wt) {
    const int idx = i % half;
    z = (i < half ? 9.0 : -9.0) * abs_[idx];
    wt = 9.0 * w[idx];
  };
  const int count = 2 * half;
  for (int a = 0; a < count; ++a) {
    for (int c = 0; c < count; ++c) {
      for (int e = 0; e < count; ++e) {
        double z0, z1, z2, w0, w1, w2;
        node(a, z0, w0);
        node(c, z1, w1);
        node(e, z2, w2);
        const Vec p{y[0] + sig[0] * z0, y[1] + sig[1] * z1, y[2] + sig[2] * z2};
        ref += w0 * w1 * w2 * weight(z0) * weight(z1) * weight(z2) * fam.bn_eval(k, p);
      }
    }
  }
  CHECK(std::abs(qmc - (1.0 + fam.eps1())) <= fam.eps1() / 2);
  CHECK(std::abs(ref - (1.0 + fam.eps1())) <= fam.eps1() / 2);
  CHECK(std::abs(qmc - ref) <= fam.eps1() / 2);
}

TEST_CASE("phi values, far vanishing and gradients") {
  const auto& fam = family();
  const auto& cov = fam.covering();
  const double r = cov.r;
  double tol = 0.0;
  for (std::size_t k = 0; k < fam.size(); ++k) tol = std::max(tol, 10 * fam.member(k).qmc_error);
  CHECK(fam.phi_eval(0, cov.centers[0]) >= 1.0 - tol);
  for (std::size_t k = 0; k < fam.size(); ++k) {
    for (double off : {5.0, 7.0, 20.0}) {
      const Vec x{cov.centers[k][0] + cov.qfunc.enclosing_radius(off * r)};
      CHECK(fam.phi_eval(k, x) <= fam.eps1());
    }
  }
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = i % fam.size();
    const Vec x{u(rng)};
    Vec g(1);
    fam.phi_grad(k, x, g);
    const double fd = (fam.phi_eval(k, Vec{x[0] + 1e-5}) - fam.phi_eval(k, Vec{x[0] - 1e-5})) / 2e-5;
    CHECK(std::abs(fd - g[0]) <= 1e-4 * std::max(1.0, std::abs(g[0])));
  }
}

TEST_CASE("witnesses") {
  const auto& fam = family();
  const auto& cov = fam.covering();
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const std::size_t m = fam.witness_m(cov.centers[k]);
    CHECK(m <= k);
    CHECK(fam.phi_eval(m, cov.centers[k]) > 0.5);
  }
  const double reff = cov.qfunc.enclosing_radius(cov.r);
  CHECK_THROWS_AS(fam.witness_m(Vec{0.5 + 10 * reff}), DomainError);
  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const Vec x{u(rng)};
    const std::size_t m = fam.witness_m(x);
    REQUIRE(fam.phi_eval(m, x) > 0.5);
    REQUIRE(fam.witness_m(x) == m);
  }
}

TEST_CASE("partition properties on a dense grid") {
  const auto& fam = family();
  auto rep = check_lemma_properties(fam, line_grid(-0.5, 0.5, 2000));
  for (const auto& p : rep.properties) {
    INFO(p.name << " worst " << p.worst_value << " tol " << p.tolerance);
    CHECK(p.pass);
  }
  CHECK(rep.all_pass());
  auto doc = rep.to_json();
  CHECK(doc["properties"].size() == 5);

  auto empty = check_lemma_properties(fam, std::vector<Vec>{});
  CHECK(empty.all_pass());
  CHECK_FALSE(empty.warnings.empty());
}

TEST_CASE("a corrupted far value is reported") {
  const auto& fam = family();
  const double r = fam.covering().r;
  std::vector<PhiSample> samples;
  for (const auto& x : line_grid(-0.5, 0.5, 400)) samples.push_back(sample_phi(fam, x));
  CHECK(check_lemma_properties(fam, samples).all_pass());
  bool corrupted = false;
  for (auto& s : samples) {
    for (std::size_t k = 0; k < fam.size() && !corrupted; ++k) {
      if (s.qdist[k] >= 6 * r) {
        s.phi[k] = 0.2;
        corrupted = true;
      }
    }
    if (corrupted) break;
  }
  REQUIRE(corrupted);
  auto rep = check_lemma_properties(fam, samples);
  const auto& far = rep.properties[3];
  CHECK(far.name == "far_value");
  CHECK_FALSE(far.pass);
  CHECK(far.worst_point.size() == 1);
  CHECK(far.worst_value == 0.2);
  CHECK_FALSE(rep.all_pass());
}

TEST_CASE("saved family reproduces values") {
  const auto& fam = family();
  auto again = PhiFamily::from_json(small_covering(), fam.to_json());
  for (int i = 0; i < 50; ++i) {
    const Vec x{-0.5 + i / 49.0};
    for (std::size_t k = 0; k < fam.size(); ++k) REQUIRE(again.phi_eval(k, x) == fam.phi_eval(k, x));
  }
}
