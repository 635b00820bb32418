#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace fineapprox {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

/// Closed interval [lo, hi] on one axis.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  bool contains(double t) const { return lo <= t && t <= hi; }
};

/// Axis-aligned compact working box.
using Box = std::vector<Interval>;

inline bool box_contains(const Box& box, ConstSpan x) {
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (!box[i].contains(x[i])) return false;
  }
  return true;
}

inline double dot(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double euclidean_norm(ConstSpan x) { return std::sqrt(dot(x, x)); }

}  // namespace fineapprox
