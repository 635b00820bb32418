#pragma once

// Gaussian convolution: closed-form 1D convolution of piecewise polynomials,
// multi-dimensional Gaussian expectations over a shared Sobol point set, and
// the parameter searches for kappa and k.

#include <cmath>
#include <numbers>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "fineapprox/bumps1d.hpp"
#include "fineapprox/qmc.hpp"
#include "fineapprox/types.hpp"

namespace fineapprox {

/// t -> (1/a) * integral source(s) exp(-kappa (t-s)^2) ds, a = sqrt(pi/kappa).
class Conv1D {
 public:
  Conv1D() = default;
  Conv1D(PiecewisePoly source, double kappa);

  double eval(double t) const;
  double deriv(double t) const;

  double kappa() const { return kappa_; }
  double normalizer() const { return std::sqrt(std::numbers::pi / kappa_); }
  /// Standard deviation of the equivalent normal kernel, 1/sqrt(2 kappa).
  double sigma() const { return 1.0 / std::sqrt(2.0 * kappa_); }
  const PiecewisePoly& source() const { return source_; }

 private:
  PiecewisePoly source_;
  PiecewisePoly source_deriv_;
  double kappa_ = 1.0;
};

/// Convolution of a single piecewise polynomial; exposed for tests.
double gauss_convolve(const PiecewisePoly& p, double kappa, double t);

struct KappaSelection {
  double kappa = 0.0;
  double worst_value_err = 0.0;
  double worst_deriv_err = 0.0;
  /// Probe with the smallest tolerance margin at the accepted kappa.
  double worst_t = 0.0;
  int doublings = 0;
};

/// Doubling search from kappa = 2 until value and derivative errors are below
/// tol(t) at every probe, and the Gaussian tail bound holds beyond the probe
/// range. The source must have zero tails.
KappaSelection select_kappa(const PiecewisePoly& source, const std::function<double(double)>& tol,
                            double probe_lo, double probe_hi, std::size_t probe_count);

/// prod_{j=1..n} sqrt(pi 2^j / k).
double gauss_normalizer(int n, double k);

/// E[fn(x + sigma o Z)], Z standard normal, averaged over the first
/// `samples` points of a shared Sobol normal set.
class GaussExpect {
 public:
  GaussExpect() = default;
  GaussExpect(Vec sigma, std::shared_ptr<const NormalPointSet> points, std::size_t samples);

  int dim() const { return static_cast<int>(sigma_.size()); }
  const Vec& sigma() const { return sigma_; }
  std::size_t samples() const { return samples_; }
  std::uint64_t key() const { return points_->key(); }
  /// Largest |sigma_j z_j| over the samples, per coordinate.
  const Vec& max_shift() const { return max_shift_; }

  template <class F>
  double value(ConstSpan x, F&& fn) const {
    const int n = dim();
    Vec y(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < samples_; ++i) {
      const double* z = points_->point(i);
      for (int j = 0; j < n; ++j) y[j] = x[j] + sigma_[j] * z[j];
      acc += fn(ConstSpan(y));
    }
    return acc / static_cast<double>(samples_);
  }

  /// fn(y, grad_out) returns fn(y) and writes its gradient.
  template <class F>
  double value_grad(ConstSpan x, F&& fn, MutSpan grad) const {
    const int n = dim();
    Vec y(n);
    Vec g(n);
    double acc = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < samples_; ++i) {
      const double* z = points_->point(i);
      for (int j = 0; j < n; ++j) y[j] = x[j] + sigma_[j] * z[j];
      acc += fn(ConstSpan(y), MutSpan(g));
      for (int j = 0; j < n; ++j) grad[j] += g[j];
    }
    const double inv = 1.0 / static_cast<double>(samples_);
    for (int j = 0; j < n; ++j) grad[j] *= inv;
    return acc * inv;
  }

 private:
  Vec sigma_;
  std::shared_ptr<const NormalPointSet> points_;
  std::size_t samples_ = 0;
  Vec max_shift_;
};

/// sigma_j = sqrt(2^j / (2k)), j = 1..n.
Vec kernel_sigmas(int n, double k);

struct KSelection {
  double k = 0.0;
  /// Certified sup error sum_j sigma_j sqrt(2/pi) * max(lip, deriv_lip).
  double certified_error = 0.0;
  double spot_check_error = 0.0;
};

/// Smallest k from k >= 2 (max(lip, deriv_lip) sqrt(2/pi) sum 2^{j/2} / (eps1/2))^2.
/// spot_check, if given, returns the worst observed |h - b| (value and
/// gradient) for a candidate k; k is quadrupled while that exceeds eps1/2.
KSelection select_k(double bn_lip, double bn_deriv_lip, double eps1, int n,
                    const std::function<double(double)>& spot_check = {});

/// Isotropic Gaussian smoothing over antithetic Sobol pairs (+z, -z), so
/// affine functions are reproduced exactly up to rounding.
class GaussianSmoother {
 public:
  GaussianSmoother() = default;
  GaussianSmoother(double sigma, int dim, std::size_t half_count, std::uint64_t key);

  double sigma() const { return sigma_; }
  int dim() const { return dim_; }
  std::size_t samples() const { return 2 * half_; }
  std::uint64_t key() const { return points_ ? points_->key() : 0; }
  /// Mean of |z| over the samples; the smoothing error of an L-Lipschitz
  /// function is at most L * sigma * mean_norm().
  double mean_norm() const { return mean_norm_; }
  /// Largest displacement sigma * |z|.
  double max_displacement() const { return points_ ? sigma_ * points_->max_norm() : 0.0; }

  template <class F>
  double value(ConstSpan x, F&& fn) const {
    if (sigma_ == 0.0) return fn(x);
    Vec y(dim_);
    double acc = 0.0;
    for (std::size_t i = 0; i < half_; ++i) {
      const double* z = points_->point(i);
      for (int sign = -1; sign <= 1; sign += 2) {
        for (int j = 0; j < dim_; ++j) y[j] = x[j] + sign * sigma_ * z[j];
        acc += fn(ConstSpan(y));
      }
    }
    return acc / static_cast<double>(2 * half_);
  }

  /// Pathwise gradient: fn(y, grad_out) returns fn(y) and writes grad fn(y).
  template <class F>
  double value_grad(ConstSpan x, F&& fn, MutSpan grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    Vec y(dim_);
    Vec g(dim_);
    if (sigma_ == 0.0) return fn(x, grad);
    double acc = 0.0;
    for (std::size_t i = 0; i < half_; ++i) {
      const double* z = points_->point(i);
      for (int sign = -1; sign <= 1; sign += 2) {
        for (int j = 0; j < dim_; ++j) y[j] = x[j] + sign * sigma_ * z[j];
        acc += fn(ConstSpan(y), MutSpan(g));
        for (int j = 0; j < dim_; ++j) grad[j] += g[j];
      }
    }
    const double inv = 1.0 / static_cast<double>(2 * half_);
    for (int j = 0; j < dim_; ++j) grad[j] *= inv;
    return acc * inv;
  }

  /// Score-function gradient E[Z (fn(x + sigma Z) - fn(x))] / sigma, for
  /// callers without an analytic gradient.
  template <class F>
  double value_grad_score(ConstSpan x, F&& fn, MutSpan grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double f0 = fn(x);
    if (sigma_ == 0.0) return f0;
    Vec y(dim_);
    double acc = 0.0;
    for (std::size_t i = 0; i < half_; ++i) {
      const double* z = points_->point(i);
      for (int sign = -1; sign <= 1; sign += 2) {
        for (int j = 0; j < dim_; ++j) y[j] = x[j] + sign * sigma_ * z[j];
        const double fy = fn(ConstSpan(y));
        acc += fy;
        for (int j = 0; j < dim_; ++j) grad[j] += sign * z[j] * (fy - f0);
      }
    }
    const double inv = 1.0 / static_cast<double>(2 * half_);
    for (int j = 0; j < dim_; ++j) grad[j] *= inv / sigma_;
    return acc * inv;
  }

 private:
  double sigma_ = 0.0;
  int dim_ = 0;
  std::size_t half_ = 0;
  std::shared_ptr<const NormalPointSet> points_;
  double mean_norm_ = 0.0;
};

/// Picks sigma with fn_lip * sigma * mean|Z| <= target_sup_err. fn_lip = 0
/// returns a smoother with sigma = 0, i.e. the identity.
GaussianSmoother mollify_lipschitz(double fn_lip, double target_sup_err, int d,
                                   std::size_t half_count, std::uint64_t key);

}  // namespace fineapprox
