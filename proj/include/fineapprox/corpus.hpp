#pragma once

// Test functions with analytic gradients and certified constants.

#include <string>
#include <string_view>
#include <vector>

#include "fineapprox/patches.hpp"

namespace fineapprox {

struct CorpusFunction {
  std::string name;
  /// 0 means any dimension.
  int dim = 0;
  /// Lipschitz constant (euclidean gradient norm bound) on all of R^d.
  double lip = 0.0;
  /// Bound on the operator norm of the Hessian.
  double m2 = 0.0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::string description;

  /// Evaluator bound to a dimension; throws ConfigError if unsupported.
  Target target(int d) const;
};

const std::vector<CorpusFunction>& corpus();
const CorpusFunction& corpus_lookup(std::string_view name);

}  // namespace fineapprox
