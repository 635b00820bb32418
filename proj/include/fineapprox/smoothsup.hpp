#pragma once

// Even-power surrogate for the sup norm: (sum |v_i|^{2m})^{1/2m}, which lies
// between |v|_inf and N^{1/2m} |v|_inf.

#include <cstddef>

#include "fineapprox/types.hpp"

namespace fineapprox {

double smooth_sup_norm(ConstSpan v, int m);
/// Writes d/dv_i and returns the value. All-zero v is a contract violation.
double smooth_sup_grad(ConstSpan v, int m, MutSpan grad);

/// Smallest m with n^{1/2m} <= a1_target.
int smooth_sup_degree(std::size_t n, double a1_target);
/// n^{1/2m}.
double smooth_sup_constant(std::size_t n, int m);

/// Integer power by squaring.
inline double int_pow(double x, int e) {
  double result = 1.0;
  while (e > 0) {
    if (e & 1) result *= x;
    x *= x;
    e >>= 1;
  }
  return result;
}

}  // namespace fineapprox
