#pragma once

// C^2 piecewise-polynomial cutoffs built from the quintic smoothstep
// S(u) = 10u^3 - 15u^4 + 6u^5, with exact constant plateaus.

#include <array>
#include <cstddef>
#include <vector>

namespace fineapprox {

/// Coefficients c[0..5] of sum c_i u^i.
using Quintic = std::array<double, 6>;

double poly_eval(const Quintic& c, double u);
Quintic poly_derivative(const Quintic& c);
/// Real roots of c on [lo, hi], found by splitting at the roots of the
/// derivative and bisecting each monotone segment.
std::vector<double> poly_roots(const Quintic& c, double lo, double hi);
/// max |c(u)| over u in [lo, hi].
double poly_max_abs(const Quintic& c, double lo, double hi);

class PiecewisePoly {
 public:
  /// Piece i lives on [breaks[i], breaks[i+1]] and is a polynomial in the
  /// normalized variable u = (t - breaks[i]) / (breaks[i+1] - breaks[i]).
  struct Piece {
    Quintic coeffs{};
    bool constant = false;
  };

  PiecewisePoly() = default;
  PiecewisePoly(double left_tail, std::vector<double> breaks, std::vector<Piece> pieces,
                double right_tail);

  static PiecewisePoly constant(double c);

  double eval(double t) const;
  double deriv(double t) const;
  double second_deriv(double t) const;

  /// max |p'| over the real line.
  double lipschitz() const;
  /// max |p''| over the real line.
  double max_second_derivative() const;
  double max_value() const;
  double min_value() const;

  /// Exact derivative as a piecewise polynomial (tails zero).
  PiecewisePoly derivative() const;

  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  double left_tail() const { return left_; }
  double right_tail() const { return right_; }
  double piece_width(std::size_t i) const { return breaks_[i + 1] - breaks_[i]; }

 private:
  // Index of the piece used at t: -1 left tail, pieces_.size() right tail.
  long locate(double t) const;
  bool is_flat(long idx) const;
  double piece_value(long idx, double t, int order) const;

  double left_ = 0.0;
  std::vector<double> breaks_;
  std::vector<Piece> pieces_;
  double right_ = 0.0;
};

/// Smoothstep piece going from value a (u=0) to value b (u=1).
PiecewisePoly::Piece smoothstep_piece(double a, double b);
PiecewisePoly::Piece constant_piece(double c);

/// mu: 1+eps on (-inf, 1/2], 0 on [1, inf).
PiecewisePoly make_mu(double eps);
/// b^n: 1 outside (2r, M+2r), 0 on [3r, M+r].
PiecewisePoly make_bn_profile(double r, double m);
/// b-hat: 1 outside (-1-r, 4r), 0 on [-1, 3r].
PiecewisePoly make_bhat(double r);
/// nu-bar: 1 on |t| <= 5r, 0 on |t| >= 11r/2.
PiecewisePoly make_nubar(double r);

/// Closed-form Lipschitz constants recorded by the constructors above.
double mu_lipschitz(double eps);
double profile_lipschitz(double r);
double nubar_lipschitz(double r);

}  // namespace fineapprox
