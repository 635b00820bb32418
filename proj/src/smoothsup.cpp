#include "fineapprox/smoothsup.hpp"

#include <algorithm>
#include <cmath>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

double scaled_sum(ConstSpan v, int p, double top) {
  double s = 0.0;
  for (double x : v) {
    if (x != 0.0) s += int_pow(std::abs(x) / top, p);
  }
  return s;
}

double max_abs(ConstSpan v) {
  double top = 0.0;
  for (double x : v) top = std::max(top, std::abs(x));
  return top;
}

}  // namespace

double smooth_sup_norm(ConstSpan v, int m) {
  if (v.empty()) throw ContractViolation("smooth sup of an empty vector");
  if (m < 1) throw ConfigError("smooth sup degree must be >= 1");
  const double top = max_abs(v);
  if (top == 0.0) throw ContractViolation("smooth sup of the zero vector");
  return top * std::pow(scaled_sum(v, 2 * m, top), 1.0 / (2.0 * m));
}

double smooth_sup_grad(ConstSpan v, int m, MutSpan grad) {
  const double value = smooth_sup_norm(v, m);
  const int p = 2 * m;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double ratio = v[i] / value;
    grad[i] = ratio == 0.0 ? 0.0 : int_pow(ratio, p - 1);
  }
  return value;
}

int smooth_sup_degree(std::size_t n, double a1_target) {
  if (!(a1_target > 1.0)) throw ConfigError("A1 target must exceed 1");
  if (n <= 1) return 1;
  const int m = static_cast<int>(std::ceil(std::log(static_cast<double>(n)) / (2.0 * std::log(a1_target))));
  int out = std::max(m, 1);
  while (out > 1 && smooth_sup_constant(n, out - 1) <= a1_target) --out;
  while (smooth_sup_constant(n, out) > a1_target) ++out;
  return out;
}

double smooth_sup_constant(std::size_t n, int m) {
  return std::pow(static_cast<double>(n), 1.0 / (2.0 * m));
}

}  // namespace fineapprox
