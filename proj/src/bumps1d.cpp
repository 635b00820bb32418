#include "fineapprox/bumps1d.hpp"

#include <algorithm>
#include <cmath>

#include "fineapprox/error.hpp"

namespace fineapprox {

double poly_eval(const Quintic& c, double u) {
  double v = c[5];
  for (int i = 4; i >= 0; --i) v = v * u + c[i];
  return v;
}

Quintic poly_derivative(const Quintic& c) {
  Quintic d{};
  for (int i = 1; i < 6; ++i) d[i - 1] = i * c[i];
  return d;
}

namespace {

int degree(const Quintic& c) {
  for (int i = 5; i > 0; --i) {
    if (c[i] != 0.0) return i;
  }
  return 0;
}

double bisect(const Quintic& c, double lo, double hi) {
  double flo = poly_eval(c, lo);
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = poly_eval(c, mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> poly_roots(const Quintic& c, double lo, double hi) {
  const int deg = degree(c);
  std::vector<double> roots;
  if (deg == 0) return roots;
  if (deg == 1) {
    const double x = -c[0] / c[1];
    if (x >= lo && x <= hi) roots.push_back(x);
    return roots;
  }
  // Between consecutive critical points the polynomial is monotone.
  std::vector<double> cuts{lo};
  for (double x : poly_roots(poly_derivative(c), lo, hi)) cuts.push_back(x);
  cuts.push_back(hi);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    const double fa = poly_eval(c, a);
    const double fb = poly_eval(c, b);
    double root;
    if (fa == 0.0) {
      root = a;
    } else if (fb == 0.0) {
      root = b;
    } else if ((fa < 0.0) != (fb < 0.0)) {
      root = bisect(c, a, b);
    } else {
      continue;
    }
    if (roots.empty() || root > roots.back()) roots.push_back(root);
  }
  return roots;
}

double poly_max_abs(const Quintic& c, double lo, double hi) {
  double m = std::max(std::abs(poly_eval(c, lo)), std::abs(poly_eval(c, hi)));
  for (double x : poly_roots(poly_derivative(c), lo, hi)) m = std::max(m, std::abs(poly_eval(c, x)));
  return m;
}

PiecewisePoly::PiecewisePoly(double left_tail, std::vector<double> breaks,
                             std::vector<Piece> pieces, double right_tail)
    : left_(left_tail), breaks_(std::move(breaks)), pieces_(std::move(pieces)), right_(right_tail) {
  if (!pieces_.empty() && breaks_.size() != pieces_.size() + 1) {
    throw ContractViolation("piecewise polynomial needs one more breakpoint than pieces");
  }
  for (std::size_t i = 0; i + 1 < breaks_.size(); ++i) {
    if (!(breaks_[i] < breaks_[i + 1])) {
      throw ContractViolation("breakpoints must be strictly increasing");
    }
  }
}

PiecewisePoly PiecewisePoly::constant(double c) { return PiecewisePoly(c, {}, {}, c); }

long PiecewisePoly::locate(double t) const {
  const auto n = static_cast<long>(pieces_.size());
  if (n == 0 || t < breaks_.front()) return -1;
  if (t > breaks_.back()) return n;
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  long idx = static_cast<long>(it - breaks_.begin()) - 1;  // t in [breaks[idx], breaks[idx+1])
  if (t == breaks_[idx]) {
    // On a breakpoint prefer the flat neighbour so plateaus are exact.
    if (is_flat(idx - 1)) return idx - 1;
    return idx;
  }
  return idx;
}

bool PiecewisePoly::is_flat(long idx) const {
  if (idx < 0 || idx >= static_cast<long>(pieces_.size())) return true;
  return pieces_[idx].constant;
}

double PiecewisePoly::piece_value(long idx, double t, int order) const {
  const auto n = static_cast<long>(pieces_.size());
  if (idx < 0) return order == 0 ? left_ : 0.0;
  if (idx >= n) return order == 0 ? right_ : 0.0;
  const Piece& p = pieces_[idx];
  if (p.constant) return order == 0 ? p.coeffs[0] : 0.0;
  const double w = breaks_[idx + 1] - breaks_[idx];
  const double u = std::clamp((t - breaks_[idx]) / w, 0.0, 1.0);
  Quintic c = p.coeffs;
  double scale = 1.0;
  for (int k = 0; k < order; ++k) {
    c = poly_derivative(c);
    scale /= w;
  }
  return poly_eval(c, u) * scale;
}

double PiecewisePoly::eval(double t) const { return piece_value(locate(t), t, 0); }
double PiecewisePoly::deriv(double t) const { return piece_value(locate(t), t, 1); }
double PiecewisePoly::second_deriv(double t) const { return piece_value(locate(t), t, 2); }

double PiecewisePoly::lipschitz() const {
  double m = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].constant) continue;
    m = std::max(m, poly_max_abs(poly_derivative(pieces_[i].coeffs), 0.0, 1.0) / piece_width(i));
  }
  return m;
}

double PiecewisePoly::max_second_derivative() const {
  double m = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].constant) continue;
    const double w = piece_width(i);
    m = std::max(m, poly_max_abs(poly_derivative(poly_derivative(pieces_[i].coeffs)), 0.0, 1.0) /
                        (w * w));
  }
  return m;
}

double PiecewisePoly::max_value() const {
  double m = std::max(left_, right_);
  for (const auto& p : pieces_) {
    if (p.constant) {
      m = std::max(m, p.coeffs[0]);
      continue;
    }
    m = std::max({m, poly_eval(p.coeffs, 0.0), poly_eval(p.coeffs, 1.0)});
    for (double x : poly_roots(poly_derivative(p.coeffs), 0.0, 1.0)) m = std::max(m, poly_eval(p.coeffs, x));
  }
  return m;
}

double PiecewisePoly::min_value() const {
  double m = std::min(left_, right_);
  for (const auto& p : pieces_) {
    if (p.constant) {
      m = std::min(m, p.coeffs[0]);
      continue;
    }
    m = std::min({m, poly_eval(p.coeffs, 0.0), poly_eval(p.coeffs, 1.0)});
    for (double x : poly_roots(poly_derivative(p.coeffs), 0.0, 1.0)) m = std::min(m, poly_eval(p.coeffs, x));
  }
  return m;
}

PiecewisePoly PiecewisePoly::derivative() const {
  std::vector<Piece> out;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    Piece d;
    if (pieces_[i].constant) {
      d.constant = true;
    } else {
      d.coeffs = poly_derivative(pieces_[i].coeffs);
      for (double& c : d.coeffs) c /= piece_width(i);
    }
    out.push_back(d);
  }
  return PiecewisePoly(0.0, breaks_, std::move(out), 0.0);
}

PiecewisePoly::Piece smoothstep_piece(double a, double b) {
  const double delta = b - a;
  return {{a, 0.0, 0.0, 10.0 * delta, -15.0 * delta, 6.0 * delta}, false};
}

PiecewisePoly::Piece constant_piece(double c) { return {{c, 0, 0, 0, 0, 0}, true}; }

PiecewisePoly make_mu(double eps) {
  if (!(eps > 0.0)) throw ConfigError("make_mu needs eps > 0");
  return PiecewisePoly(1.0 + eps, {0.5, 1.0}, {smoothstep_piece(1.0 + eps, 0.0)}, 0.0);
}

PiecewisePoly make_bn_profile(double r, double m) {
  if (!(r > 0.0)) throw ConfigError("make_bn_profile needs r > 0");
  if (!(m > r)) throw ConfigError("make_bn_profile needs M > r");
  if (m < 2.0 * r) {
    throw ConfigError("make_bn_profile needs M >= 2r so that [3r, M+r] is an interval");
  }
  if (3.0 * r == m + r) {
    return PiecewisePoly(1.0, {2.0 * r, 3.0 * r, m + 2.0 * r},
                         {smoothstep_piece(1.0, 0.0), smoothstep_piece(0.0, 1.0)}, 1.0);
  }
  return PiecewisePoly(
      1.0, {2.0 * r, 3.0 * r, m + r, m + 2.0 * r},
      {smoothstep_piece(1.0, 0.0), constant_piece(0.0), smoothstep_piece(0.0, 1.0)}, 1.0);
}

PiecewisePoly make_bhat(double r) {
  if (!(r > 0.0)) throw ConfigError("make_bhat needs r > 0");
  return PiecewisePoly(
      1.0, {-1.0 - r, -1.0, 3.0 * r, 4.0 * r},
      {smoothstep_piece(1.0, 0.0), constant_piece(0.0), smoothstep_piece(0.0, 1.0)}, 1.0);
}

PiecewisePoly make_nubar(double r) {
  if (!(r > 0.0)) throw ConfigError("make_nubar needs r > 0");
  return PiecewisePoly(
      0.0, {-5.5 * r, -5.0 * r, 5.0 * r, 5.5 * r},
      {smoothstep_piece(0.0, 1.0), constant_piece(1.0), smoothstep_piece(1.0, 0.0)}, 0.0);
}

// The smoothstep slope peaks at 15/8 in u.
double mu_lipschitz(double eps) { return (1.0 + eps) * 15.0 / 4.0; }
double profile_lipschitz(double r) { return 15.0 / (8.0 * r); }
double nubar_lipschitz(double r) { return 15.0 / (4.0 * r); }

}  // namespace fineapprox
