#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fineapprox/error.hpp"
#include "fineapprox/seppoly.hpp"

using namespace fineapprox;

namespace {

Vec random_point(std::mt19937_64& rng, int d, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec x(d);
  for (auto& v : x) v = u(rng);
  return x;
}

QFunc euclid(int d, int n) { return QFunc(SeparatingForm::make(FormKind::euclidean_power, d, n)); }

}  // namespace

TEST_CASE("separating forms evaluate the documented polynomials") {
  auto e = SeparatingForm::make(FormKind::euclidean_power, 2, 1);
  CHECK(e.q(Vec{3, 4}) == 25.0);
  CHECK(e.equivalence_constant() == 1.0);
  auto p = SeparatingForm::make(FormKind::even_power_sum, 3, 2);
  CHECK(p.q(Vec{1, 1, 1}) == 3.0);
  CHECK(p.equivalence_constant() == 3.0);
  CHECK(p.reference_norm() == RefNorm::sup);
  CHECK_THROWS_AS(form_kind_from_string("cubic"), ConfigError);
  CHECK_THROWS_AS(SeparatingForm::make(FormKind::euclidean_power, 0, 1), ConfigError);
}

TEST_CASE("q gradients") {
  auto e = SeparatingForm::make(FormKind::euclidean_power, 2, 1);
  auto g = e.q_grad(Vec{3, 4});
  CHECK(g[0] == 6.0);
  CHECK(g[1] == 8.0);
  auto z = e.q_grad(Vec{0, 0});
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
  auto p = SeparatingForm::make(FormKind::even_power_sum, 1, 2);
  CHECK(p.q_grad(Vec{2})[0] == 32.0);
  CHECK_THROWS_AS(e.q(Vec{1, 2, 3}), ContractViolation);
}

TEST_CASE("two-sided equivalence and homogeneity on random samples") {
  std::mt19937_64 rng(11);
  for (auto kind : {FormKind::euclidean_power, FormKind::even_power_sum}) {
    for (int d = 1; d <= 3; ++d) {
      for (int n = 1; n <= 2; ++n) {
        auto f = SeparatingForm::make(kind, d, n);
        for (int i = 0; i < 100000; ++i) {
          auto x = random_point(rng, d, 3.0);
          const double nx = std::pow(f.norm(x), 2 * n);
          const double q = f.q(x);
          REQUIRE(nx <= q * (1 + 1e-13));
          REQUIRE(q <= f.equivalence_constant() * nx * (1 + 1e-13));
        }
        auto x = random_point(rng, d, 1.0);
        Vec y = x;
        for (auto& v : y) v *= 1.7;
        CHECK(f.q(y) == doctest::Approx(std::pow(1.7, 2 * n) * f.q(x)).epsilon(1e-13));
        CHECK(f.q(Vec(d, 0.0)) == 0.0);
      }
    }
  }
}

TEST_CASE("Q values, gradient against finite differences, Lipschitz bound") {
  auto qf = euclid(2, 1);
  CHECK(qf.value(Vec{0, 0}) == 0.0);
  CHECK(qf.value(Vec{3, 4}) == doctest::Approx(std::sqrt(26.0) - 1.0).epsilon(1e-15));
  CHECK(qf.lipschitz_bound() == 1.0);
  CHECK(qf.padded_lipschitz() == doctest::Approx(1.0 + 1e-6));

  std::mt19937_64 rng(12);
  double max_grad = 0.0;
  for (auto kind : {FormKind::euclidean_power, FormKind::even_power_sum}) {
    for (int d = 1; d <= 3; ++d) {
      for (int n = 1; n <= 2; ++n) {
        QFunc q(SeparatingForm::make(kind, d, n));
        for (int i = 0; i < 1000; ++i) {
          auto x = random_point(rng, d, 2.0);
          auto g = q.grad(x);
          for (int j = 0; j < d; ++j) {
            Vec a = x, b = x;
            a[j] += 1e-6;
            b[j] -= 1e-6;
            const double fd = (q.value(a) - q.value(b)) / 2e-6;
            REQUIRE(std::abs(fd - g[j]) <= 1e-6 * std::max(1.0, std::abs(g[j])));
          }
          if (kind == FormKind::euclidean_power && n == 1) {
            max_grad = std::max(max_grad, euclidean_norm(g));
          }
        }
      }
    }
  }
  CHECK(max_grad <= 1.0 + 1e-12);
}

TEST_CASE("Q Lipschitz bound dominates sampled slopes") {
  std::mt19937_64 rng(13);
  for (auto kind : {FormKind::euclidean_power, FormKind::even_power_sum}) {
    for (int n = 1; n <= 2; ++n) {
      QFunc q(SeparatingForm::make(kind, 2, n));
      for (int i = 0; i < 10000; ++i) {
        auto x = random_point(rng, 2, 2.0);
        auto y = random_point(rng, 2, 2.0);
        Vec diff{x[0] - y[0], x[1] - y[1]};
        const double dist = q.form().norm(diff);
        REQUIRE(std::abs(q.value(x) - q.value(y)) <= q.padded_lipschitz() * dist * (1 + 1e-12));
      }
    }
  }
}

TEST_CASE("distortion function") {
  auto q = euclid(1, 1);
  CHECK(q.delta(0.0) == 0.0);
  CHECK(q.delta(1.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(q.delta(-2.5) == q.delta(2.5));
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = q.delta(0.01 * i);
    REQUIRE(v > prev);
    prev = v;
  }
}

TEST_CASE("Q-body membership and enclosing radius") {
  auto q = euclid(1, 1);
  CHECK(q.enclosing_radius(0.5) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-15));
  // Q(y) = 0.4 and Q(y) = 0.5 exactly at y = sqrt((1+t)^2 - 1).
  const Vec c{0.0};
  CHECK(q.contains(c, 0.5, Vec{std::sqrt(1.4 * 1.4 - 1.0)}));
  const double y05 = std::sqrt(1.5 * 1.5 - 1.0);
  CHECK(q.value(Vec{y05}) == doctest::Approx(0.5).epsilon(1e-15));
  Vec on{y05};
  while (q.value(on) < 0.5) on[0] = std::nextafter(on[0], 2.0);
  CHECK_FALSE(q.contains(c, 0.5, on));

  std::mt19937_64 rng(14);
  for (double rho : {0.25, 1.0, 4.0}) {
    for (auto kind : {FormKind::euclidean_power, FormKind::even_power_sum}) {
      QFunc qq(SeparatingForm::make(kind, 2, 2));
      int accepted = 0;
      while (accepted < 10000) {
        auto x = random_point(rng, 2, 8.0 * rho);
        if (qq.value(x) >= 4.0 * rho) continue;
        ++accepted;
        REQUIRE(qq.form().norm(x) < 8.0 * rho);
        REQUIRE(qq.form().norm(x) < qq.enclosing_radius(4.0 * rho));
      }
    }
  }
}

TEST_CASE("choose_r") {
  auto q = euclid(1, 1);
  // Independent bisection on sqrt((1+5r)^2 - 1) = 1.
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::sqrt((1 + 5 * mid) * (1 + 5 * mid) - 1) <= 1.0 ? lo : hi) = mid;
  }
  const double r = choose_r(q, 1.0, 1.0);
  CHECK(r == doctest::Approx(lo).epsilon(1e-12));
  CHECK(r == doctest::Approx((std::sqrt(2.0) - 1.0) / 5.0).epsilon(1e-12));
  CHECK(choose_r(q, 1e300, 0.5) == 0.5);
  CHECK_THROWS_AS(choose_r(q, 1e-15, 1.0), InfeasibleError);

  std::mt19937_64 rng(15);
  auto q2 = euclid(2, 1);
  const double rho = 0.3;
  const double r2 = choose_r(q2, rho, 1.0);
  Vec center{0.2, -0.1};
  for (int i = 0; i < 1000000; ++i) {
    auto d = random_point(rng, 2, rho * 1.2);
    Vec y{center[0] + d[0], center[1] + d[1]};
    if (q2.distance(y, center) < 5 * r2) REQUIRE(euclidean_norm(d) < rho);
  }
}

TEST_CASE("coverings") {
  auto q = euclid(1, 1);
  const double r = q.body_level_for_inscribed(0.5);
  CHECK(q.inscribed_radius(r) == doctest::Approx(0.5).epsilon(1e-12));
  auto cov = build_covering(q, Box{{-1, 1}}, r, CenterOrdering::lexicographic);
  REQUIRE(cov.size() == 5);
  const double expect[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i < 5; ++i) CHECK(cov.centers[i][0] == doctest::Approx(expect[i]).epsilon(1e-15));
  for (int i = 0; i <= 10000; ++i) {
    const Vec x{-1.0 + 2.0 * i / 10000.0};
    bool hit = false;
    for (const auto& c : cov.centers) hit = hit || q.distance(x, c) < r;
    REQUIRE(hit);
  }

  auto zero = build_covering(q, Box{{0, 0}}, r, CenterOrdering::center_out);
  REQUIRE(zero.size() == 1);
  CHECK(zero.centers[0][0] == 0.0);

  auto q2 = euclid(2, 1);
  auto cov2 = build_covering(q2, Box{{-1, 1}, {-1, 1}}, r, CenterOrdering::center_out);
  CHECK(cov2.size() <= 36);
  for (std::size_t k = 1; k < cov2.size(); ++k) {
    CHECK(euclidean_norm(cov2.centers[k - 1]) <= euclidean_norm(cov2.centers[k]));
  }
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const Vec x{-1.0 + 0.02 * i, -1.0 + 0.02 * j};
      bool hit = false;
      for (const auto& c : cov2.centers) hit = hit || q2.distance(x, c) < r;
      REQUIRE(hit);
    }
  }

  auto again = covering_from_json(to_json(cov2));
  CHECK(again.centers == cov2.centers);
  CHECK(again.mn_bounds == cov2.mn_bounds);
  CHECK(again.r == cov2.r);

  CHECK_THROWS_AS(build_covering(q, Box{{-1, 1}}, r, CenterOrdering::lexicographic, 50.0),
                  ConstructionError);
}

TEST_CASE("even-power coverings cover despite A > 1") {
  QFunc q(SeparatingForm::make(FormKind::even_power_sum, 2, 2));
  const double r = 0.05;
  auto cov = build_covering(q, Box{{-0.5, 0.5}, {-0.5, 0.5}}, r, CenterOrdering::center_out);
  for (int i = 0; i <= 80; ++i) {
    for (int j = 0; j <= 80; ++j) {
      const Vec x{-0.5 + i / 80.0, -0.5 + j / 80.0};
      bool hit = false;
      for (const auto& c : cov.centers) hit = hit || q.distance(x, c) < r;
      REQUIRE(hit);
    }
  }
}

TEST_CASE("M_n bounds dominate brute-force suprema") {
  auto q = euclid(1, 1);
  const double r = q.body_level_for_inscribed(0.5);
  auto cov = build_covering(q, Box{{-1, 1}}, r, CenterOrdering::lexicographic);
  CHECK(compute_mn_bound(cov, 0) ==
        doctest::Approx(q.padded_lipschitz() * q.enclosing_radius(4 * r)).epsilon(1e-15));
  std::mt19937_64 rng(16);
  const double rad = q.enclosing_radius(4 * r);
  double prev = 0.0;
  for (std::size_t k = 0; k < cov.size(); ++k) {
    const double bound = compute_mn_bound(cov, k);
    CHECK(bound >= prev);
    prev = bound;
    std::uniform_real_distribution<double> u(-rad, rad);
    double brute = 0.0;
    for (int i = 0; i < 100000; ++i) {
      const Vec x{cov.centers[k][0] + u(rng)};
      if (q.distance(x, cov.centers[k]) >= 4 * r) continue;
      for (std::size_t j = 0; j <= k; ++j) brute = std::max(brute, q.distance(x, cov.centers[j]));
    }
    CHECK(bound >= brute);
  }
  CHECK(cov.mn_bounds[2] == compute_mn_bound(cov, 2));
}
