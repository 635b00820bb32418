#include "fineapprox/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

constexpr double kClipWidth = 0.5;

// Identity on [-1, 1], continued by 1 + w tanh((|t| - 1) / w) so the
// function stays bounded with a continuous derivative.
double soft_clip(double t, double* d) {
  const double a = std::abs(t);
  if (a <= 1.0) {
    *d = 1.0;
    return t;
  }
  const double th = std::tanh((a - 1.0) / kClipWidth);
  *d = 1.0 - th * th;
  const double v = 1.0 + kClipWidth * th;
  return t < 0.0 ? -v : v;
}

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }
double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

struct GaussTerm {
  double amp;
  double cx, cy;
};
constexpr double kMixWidth = 0.4;
constexpr GaussTerm kMix[] = {{0.3, 0.2, 0.1}, {-0.2, -0.25, -0.2}};

constexpr double kRidgeX = 0.6;
constexpr double kRidgeY = 0.8;

double ridge_max_slope() { return logistic(1.0) - logistic(-1.0); }

}  // namespace

Target CorpusFunction::target(int d) const {
  if (d < 1) throw ConfigError("dimension must be positive");
  if (dim != 0 && d != dim) {
    throw ConfigError("function " + name + " is defined for d=" + std::to_string(dim));
  }
  Target t;
  t.dim = d;
  if (name == "constant") {
    t.value_grad = [](ConstSpan, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      return 1.5;
    };
  } else if (name == "affine") {
    t.value_grad = [](ConstSpan x, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      double ds = 0.0;
      const double s = soft_clip(x[0], &ds);
      g[0] = 0.3 * ds;
      return 1.5 + 0.3 * s;
    };
  } else if (name == "sin1d") {
    t.value_grad = [](ConstSpan x, MutSpan g) {
      std::fill(g.begin(), g.end(), 0.0);
      g[0] = 0.8 * std::cos(2.0 * x[0]);
      return 1.5 + 0.4 * std::sin(2.0 * x[0]);
    };
  } else if (name == "gaussmix2d") {
    t.value_grad = [](ConstSpan x, MutSpan g) {
      double v = 1.5;
      g[0] = g[1] = 0.0;
      const double inv = 1.0 / (kMixWidth * kMixWidth);
      for (const auto& term : kMix) {
        const double dx = x[0] - term.cx;
        const double dy = x[1] - term.cy;
        const double e = term.amp * std::exp(-0.5 * (dx * dx + dy * dy) * inv);
        v += e;
        g[0] -= e * dx * inv;
        g[1] -= e * dy * inv;
      }
      return v;
    };
  } else if (name == "softplus2d") {
    t.value_grad = [](ConstSpan x, MutSpan g) {
      const double u = 2.0 * (kRidgeX * x[0] + kRidgeY * x[1]);
      const double s = logistic(u) - logistic(u - 2.0);
      g[0] = 0.3 * 2.0 * kRidgeX * s;
      g[1] = 0.3 * 2.0 * kRidgeY * s;
      return 1.2 + 0.3 * (softplus(u) - softplus(u - 2.0));
    };
  } else {
    throw ConfigError("unknown corpus function: " + name);
  }
  return t;
}

const std::vector<CorpusFunction>& corpus() {
  static const std::vector<CorpusFunction> all = [] {
    std::vector<CorpusFunction> v;
    v.push_back({"constant", 0, 0.0, 0.0, 1.0, 2.0, "1.5"});
    // |s''| <= (2/w) max sech^2 tanh = (2/w) * 2/(3 sqrt 3).
    v.push_back({"affine", 0, 0.3, 0.3 * (2.0 / kClipWidth) * 2.0 / (3.0 * std::sqrt(3.0)), 1.05,
                 1.95, "1.5 + 0.3 softclip(x1)"});
    v.push_back({"sin1d", 0, 0.8, 1.6, 1.1, 1.9, "1.5 + 0.4 sin(2 x1)"});
    {
      // Each term has gradient norm <= |a| e^{-1/2} / w and Hessian norm <= |a| / w^2.
      double lip = 0.0, m2 = 0.0;
      for (const auto& t : kMix) {
        lip += std::abs(t.amp) * std::exp(-0.5) / kMixWidth;
        m2 += std::abs(t.amp) / (kMixWidth * kMixWidth);
      }
      v.push_back({"gaussmix2d", 2, lip, m2, 1.3, 1.8, "1.5 + 0.3 G(x - a) - 0.2 G(x - b)"});
    }
    v.push_back({"softplus2d", 2, 0.3 * 2.0 * ridge_max_slope(), 0.3 * 4.0 * 0.25, 1.2, 1.8,
                 "1.2 + 0.3 (sp(u) - sp(u - 2)), u = 2 v.x"});
    return v;
  }();
  return all;
}

const CorpusFunction& corpus_lookup(std::string_view name) {
  for (const auto& c : corpus()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown corpus function: " + std::string(name));
}

}  // namespace fineapprox
