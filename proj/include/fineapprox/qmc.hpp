#pragma once

// Digitally shifted Sobol points (Joe-Kuo direction numbers, up to 32
// dimensions) mapped to standard normal deviates.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fineapprox {

constexpr int kSobolMaxDim = 32;

/// Raw 32-bit Sobol integers in Gray-code order, row-major count x dim.
/// No shift is applied; point 0 is the origin.
std::vector<std::uint32_t> sobol_integers(int dim, std::size_t count);

/// Standard normal deviates from a digitally shifted Sobol set. The shift
/// words come from splitmix64 seeded with key.
class NormalPointSet {
 public:
  NormalPointSet() = default;
  NormalPointSet(int dim, std::size_t count, std::uint64_t key);

  int dim() const { return dim_; }
  std::size_t size() const { return count_; }
  std::uint64_t key() const { return key_; }
  const double* point(std::size_t i) const { return z_.data() + i * static_cast<std::size_t>(dim_); }
  /// max over points and coordinates of |z|.
  double max_abs() const { return max_abs_; }
  /// max over points of the euclidean norm of z.
  double max_norm() const { return max_norm_; }

 private:
  int dim_ = 0;
  std::size_t count_ = 0;
  std::uint64_t key_ = 0;
  std::vector<double> z_;
  double max_abs_ = 0.0;
  double max_norm_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace fineapprox
