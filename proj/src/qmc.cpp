#include "fineapprox/qmc.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

struct DirectionSpec {
  int degree;
  unsigned poly;  // interior coefficient bits
  unsigned m[7];
};

// Joe-Kuo "new-joe-kuo-6.21201" parameters for dimensions 2..32.
constexpr DirectionSpec kSpecs[kSobolMaxDim - 1] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
    {7, 7, {1, 1, 3, 13, 7, 35, 63}},
    {7, 8, {1, 3, 5, 9, 1, 25, 53}},
    {7, 14, {1, 3, 1, 13, 9, 35, 107}},
    {7, 19, {1, 3, 1, 5, 27, 61, 31}},
    {7, 21, {1, 1, 5, 11, 19, 41, 61}},
    {7, 28, {1, 3, 5, 3, 3, 13, 69}},
    {7, 31, {1, 1, 7, 13, 1, 19, 1}},
    {7, 32, {1, 3, 7, 5, 13, 19, 59}},
    {7, 37, {1, 1, 3, 9, 25, 29, 41}},
    {7, 41, {1, 3, 5, 13, 23, 1, 55}},
    {7, 42, {1, 3, 7, 3, 13, 59, 17}},
};

constexpr int kBits = 32;

std::vector<std::uint32_t> direction_numbers(int j) {
  std::vector<std::uint32_t> v(kBits);
  if (j == 0) {
    for (int i = 0; i < kBits; ++i) v[i] = 1u << (kBits - 1 - i);
    return v;
  }
  const auto& spec = kSpecs[j - 1];
  const int s = spec.degree;
  std::vector<std::uint32_t> m(kBits + 1);
  for (int i = 1; i <= s; ++i) m[i] = spec.m[i - 1];
  for (int i = s + 1; i <= kBits; ++i) {
    std::uint32_t x = m[i - s] ^ (m[i - s] << s);
    for (int k = 1; k < s; ++k) {
      if ((spec.poly >> (s - 1 - k)) & 1u) x ^= m[i - k] << k;
    }
    m[i] = x;
  }
  for (int i = 1; i <= kBits; ++i) v[i - 1] = m[i] << (kBits - i);
  return v;
}

}  // namespace

std::vector<std::uint32_t> sobol_integers(int dim, std::size_t count) {
  if (dim < 1 || dim > kSobolMaxDim) throw ConfigError("Sobol dimension must be in [1, 32]");
  if (count > (std::size_t{1} << kBits)) throw ConfigError("too many Sobol points");
  std::vector<std::vector<std::uint32_t>> dirs;
  for (int j = 0; j < dim; ++j) dirs.push_back(direction_numbers(j));
  std::vector<std::uint32_t> out(count * static_cast<std::size_t>(dim));
  std::vector<std::uint32_t> x(dim, 0u);
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) {
      // Gray-code update: flip along the lowest zero bit of i-1.
      std::size_t c = 0;
      std::size_t w = i - 1;
      while (w & 1u) {
        w >>= 1;
        ++c;
      }
      for (int j = 0; j < dim; ++j) x[j] ^= dirs[j][c];
    }
    std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dim));
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

NormalPointSet::NormalPointSet(int dim, std::size_t count, std::uint64_t key)
    : dim_(dim), count_(count), key_(key) {
  if (count == 0) throw ConfigError("point set size must be positive");
  const auto raw = sobol_integers(dim, count);
  std::uint64_t state = key;
  std::vector<std::uint32_t> shift(dim);
  for (auto& s : shift) s = static_cast<std::uint32_t>(splitmix64(state) >> 32);
  z_.resize(raw.size());
  constexpr double scale = 1.0 / 4294967296.0;
  for (std::size_t i = 0; i < count; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < dim; ++j) {
      const std::size_t at = i * dim + j;
      // Midpoint offset keeps u strictly inside (0,1).
      const double u = (static_cast<double>(raw[at] ^ shift[j]) + 0.5) * scale;
      const double z = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
      z_[at] = z;
      max_abs_ = std::max(max_abs_, std::abs(z));
      norm2 += z * z;
    }
    max_norm_ = std::max(max_norm_, std::sqrt(norm2));
  }
}

}  // namespace fineapprox
