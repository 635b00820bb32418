#include "fineapprox/mollify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <limits>
#include <sstream>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

// 16-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
constexpr std::array<double, 8> kGlNodes = {
    0.0950125098376374401853193, 0.2816035507792589132304605, 0.4580167776572273863424194,
    0.6178762444026437484466718, 0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
constexpr std::array<double, 8> kGlWeights = {
    0.1894506104550684962853967, 0.1826034150449235888667637, 0.1691565193950025381893121,
    0.1495959888165767320815017, 0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

constexpr double kCutoffSigmas = 40.0;

// (1/a) * integral_alpha^beta exp(-kappa v^2) dv, a = sqrt(pi/kappa).
double gauss_mass(double sk, double alpha, double beta) {
  const double x1 = sk * alpha;
  const double x2 = sk * beta;
  if (x1 >= 0.0) return 0.5 * (std::erfc(x1) - std::erfc(x2));
  if (x2 <= 0.0) return 0.5 * (std::erfc(-x2) - std::erfc(-x1));
  return 1.0 - 0.5 * (std::erfc(x2) + std::erfc(-x1));
}

double binom(int n, int k) {
  static constexpr double table[6][6] = {{1, 0, 0, 0, 0, 0},  {1, 1, 0, 0, 0, 0},
                                         {1, 2, 1, 0, 0, 0},  {1, 3, 3, 1, 0, 0},
                                         {1, 4, 6, 4, 1, 0},  {1, 5, 10, 10, 5, 1}};
  return table[n][k];
}

double piece_integral(const Quintic& c, double breakpoint, double width, double kappa, double t,
                      double alpha, double beta) {
  const double sk = std::sqrt(kappa);
  const double sigma = 1.0 / std::sqrt(2.0 * kappa);
  if (width < 0.5 * sigma) {
    // Narrow piece: the kernel barely varies across it, so quadrature is
    // better conditioned than the shifted-moment expansion.
    const double mid = 0.5 * (alpha + beta);
    const double half = 0.5 * (beta - alpha);
    double acc = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
      for (int sign = -1; sign <= 1; sign += 2) {
        const double v = mid + sign * half * kGlNodes[i];
        const double u = (t + v - breakpoint) / width;
        acc += kGlWeights[i] * poly_eval(c, u) * std::exp(-kappa * v * v);
      }
    }
    return acc * half * sk / std::sqrt(std::numbers::pi);
  }
  // Rewrite the piece as a polynomial in v = s - t.
  const double ut = (t - breakpoint) / width;
  std::array<double, 6> e{};
  double wpow = 1.0;
  for (int j = 0; j < 6; ++j) {
    double s = 0.0;
    for (int i = 5; i >= j; --i) s = s * ut + c[i] * binom(i, j);
    e[j] = s / wpow;
    wpow *= width;
  }
  // Normalized moments J_k = (1/a) int_alpha^beta v^k exp(-kappa v^2) dv.
  const double ea = std::exp(-kappa * alpha * alpha);
  const double eb = std::exp(-kappa * beta * beta);
  const double inv2ka = 1.0 / (2.0 * std::sqrt(std::numbers::pi * kappa));
  std::array<double, 6> j{};
  j[0] = gauss_mass(sk, alpha, beta);
  j[1] = (ea - eb) * inv2ka;
  double ap = alpha;
  double bp = beta;
  for (int k = 2; k < 6; ++k) {
    j[k] = (k - 1) / (2.0 * kappa) * j[k - 2] + (ap * ea - bp * eb) * inv2ka;
    ap *= alpha;
    bp *= beta;
  }
  double acc = 0.0;
  for (int k = 0; k < 6; ++k) acc += e[k] * j[k];
  return acc;
}

}  // namespace

double gauss_convolve(const PiecewisePoly& p, double kappa, double t) {
  if (!(kappa > 0.0)) throw ConfigError("convolution needs kappa > 0");
  const auto& br = p.breaks();
  const auto& pieces = p.pieces();
  if (pieces.empty()) return p.left_tail();
  const double sk = std::sqrt(kappa);
  const double cutoff = kCutoffSigmas / std::sqrt(2.0 * kappa);
  double acc = 0.0;
  if (p.left_tail() != 0.0) acc += p.left_tail() * 0.5 * std::erfc(sk * (t - br.front()));
  if (p.right_tail() != 0.0) acc += p.right_tail() * 0.5 * std::erfc(sk * (br.back() - t));
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    double alpha = br[i] - t;
    double beta = br[i + 1] - t;
    if (alpha > cutoff || beta < -cutoff) continue;
    alpha = std::max(alpha, -cutoff);
    beta = std::min(beta, cutoff);
    if (pieces[i].constant) {
      if (pieces[i].coeffs[0] != 0.0) acc += pieces[i].coeffs[0] * gauss_mass(sk, alpha, beta);
      continue;
    }
    acc += piece_integral(pieces[i].coeffs, br[i], p.piece_width(i), kappa, t, alpha, beta);
  }
  return acc;
}

Conv1D::Conv1D(PiecewisePoly source, double kappa)
    : source_(std::move(source)), kappa_(kappa) {
  if (!(kappa > 0.0)) throw ConfigError("convolution needs kappa > 0");
  source_deriv_ = source_.derivative();
}

double Conv1D::eval(double t) const { return gauss_convolve(source_, kappa_, t); }
double Conv1D::deriv(double t) const { return gauss_convolve(source_deriv_, kappa_, t); }

KappaSelection select_kappa(const PiecewisePoly& source, const std::function<double(double)>& tol,
                            double probe_lo, double probe_hi, std::size_t probe_count) {
  if (source.left_tail() != 0.0 || source.right_tail() != 0.0 || source.pieces().empty()) {
    throw ContractViolation("select_kappa needs a compactly supported source");
  }
  const auto& br = source.breaks();
  if (!(probe_lo <= br.front() && probe_hi >= br.back())) {
    throw ContractViolation("select_kappa probe range must contain the source support");
  }
  if (probe_count < 2) throw ContractViolation("select_kappa needs at least two probes");

  // Fixed probes: uniform over the range plus 64 per piece.
  std::vector<double> fixed;
  for (std::size_t i = 0; i < probe_count; ++i) {
    fixed.push_back(probe_lo + (probe_hi - probe_lo) * static_cast<double>(i) /
                                   static_cast<double>(probe_count - 1));
  }
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    for (int k = 0; k <= 64; ++k) fixed.push_back(br[i] + (br[i + 1] - br[i]) * k / 64.0);
  }
  for (double t : fixed) {
    const double tt = tol(t);
    if (!(tt > 0.0)) {
      std::ostringstream msg;
      msg << "select_kappa: tolerance " << tt << " at t=" << t << " is not positive";
      throw InfeasibleError(msg.str());
    }
  }
  const PiecewisePoly deriv = source.derivative();
  const double src_max = std::max(std::abs(source.max_value()), std::abs(source.min_value()));
  const double der_max = source.lipschitz();
  const double support_lo = br.front();
  const double support_hi = br.back();

  double worst_t = 0.0;
  double worst_ratio = 0.0;
  int doublings = 0;
  for (double kappa = 2.0; kappa <= std::ldexp(1.0, 60); kappa *= 2.0, ++doublings) {
    const Conv1D conv(source, kappa);
    const double sigma = conv.sigma();
    std::vector<double> probes = fixed;
    for (double b : br) {
      for (double m : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        probes.push_back(b - m * sigma);
        probes.push_back(b + m * sigma);
      }
    }
    KappaSelection sel{kappa, 0.0, 0.0, 0.0, doublings};
    worst_ratio = 0.0;
    bool ok = true;
    for (double t : probes) {
      const double tt = tol(t);
      const double ev = std::abs(conv.eval(t) - source.eval(t));
      const double ed = std::abs(conv.deriv(t) - deriv.eval(t));
      sel.worst_value_err = std::max(sel.worst_value_err, ev);
      sel.worst_deriv_err = std::max(sel.worst_deriv_err, ed);
      const double ratio = std::max(ev, ed) / tt;
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst_t = t;
      }
      if (!(ratio <= 1.0)) ok = false;
    }
    if (ok) {
      // Beyond the probe range |conv| <= max|source| erfc(sqrt(kappa) dist)/2,
      // and likewise for the derivative. The Gaussian factor decays faster than
      // any polynomial tolerance, so checking a geometric ladder suffices.
      const double sk = std::sqrt(kappa);
      for (double step = 0.0; step < 60.0 && ok; step += 1.0) {
        const double reach = std::ldexp(1.0, static_cast<int>(step)) - 1.0;
        for (double t : {probe_hi + reach * (probe_hi - probe_lo + 1.0),
                         probe_lo - reach * (probe_hi - probe_lo + 1.0)}) {
          const double dist = t > support_hi ? t - support_hi : support_lo - t;
          const double bound = std::max(src_max, der_max) * 0.5 * std::erfc(sk * dist);
          if (!(bound <= tol(t))) {
            ok = false;
            worst_t = t;
          }
        }
      }
    }
    if (ok) {
      sel.worst_t = worst_t;
      return sel;
    }
  }
  std::ostringstream msg;
  msg << "select_kappa: kappa would exceed 2^60; worst probe t=" << worst_t
      << " with error/tolerance ratio " << worst_ratio;
  throw InfeasibleError(msg.str());
}

double gauss_normalizer(int n, double k) {
  if (n < 1 || !(k > 0.0)) throw ConfigError("gauss_normalizer needs n >= 1 and k > 0");
  double log_value = 0.0;
  for (int j = 1; j <= n; ++j) log_value += 0.5 * (std::log(std::numbers::pi) + j * std::log(2.0) - std::log(k));
  if (!(std::abs(log_value) < 700.0)) {
    std::ostringstream msg;
    msg << "gauss_normalizer out of double range: log value " << log_value;
    throw RangeError(msg.str());
  }
  return std::exp(log_value);
}

GaussExpect::GaussExpect(Vec sigma, std::shared_ptr<const NormalPointSet> points,
                         std::size_t samples)
    : sigma_(std::move(sigma)), points_(std::move(points)), samples_(samples) {
  if (samples_ == 0) throw ConfigError("Gaussian expectation needs at least one sample");
  if (!points_ || points_->dim() < dim() || points_->size() < samples_) {
    throw ConfigError("point set too small for the requested expectation");
  }
  max_shift_.assign(sigma_.size(), 0.0);
  for (std::size_t i = 0; i < samples_; ++i) {
    const double* z = points_->point(i);
    for (int j = 0; j < dim(); ++j) max_shift_[j] = std::max(max_shift_[j], std::abs(sigma_[j] * z[j]));
  }
}

Vec kernel_sigmas(int n, double k) {
  Vec s(n);
  for (int j = 1; j <= n; ++j) s[j - 1] = std::sqrt(std::ldexp(1.0, j) / (2.0 * k));
  return s;
}

KSelection select_k(double bn_lip, double bn_deriv_lip, double eps1, int n,
                    const std::function<double(double)>& spot_check) {
  if (!(eps1 > 0.0)) throw ConfigError("select_k needs eps1 > 0");
  if (n < 1) throw ConfigError("select_k needs n >= 1");
  const double lip = std::max(bn_lip, bn_deriv_lip);
  double sum = 0.0;
  for (int j = 1; j <= n; ++j) sum += std::sqrt(std::ldexp(1.0, j));
  const double root = lip * std::sqrt(2.0 / std::numbers::pi) * sum / (0.5 * eps1);
  double k = 2.0 * root * root;
  if (!std::isfinite(k) || !(k > 0.0)) {
    if (lip == 0.0) {
      k = 1.0;
    } else {
      std::ostringstream msg;
      msg << "select_k: required k overflows for n=" << n;
      throw InfeasibleError(msg.str());
    }
  }
  auto certified = [&](double kk) {
    double s = 0.0;
    for (double sig : kernel_sigmas(n, kk)) s += sig;
    return lip * s * std::sqrt(2.0 / std::numbers::pi);
  };
  KSelection out{k, certified(k), 0.0};
  if (!spot_check) return out;
  for (int attempt = 0; attempt < 10; ++attempt) {
    out.spot_check_error = spot_check(out.k);
    if (out.spot_check_error <= 0.5 * eps1) return out;
    out.k *= 4.0;
    if (!std::isfinite(out.k)) break;
    out.certified_error = certified(out.k);
  }
  std::ostringstream msg;
  msg << "select_k: spot check error " << out.spot_check_error << " stays above eps1/2 for n=" << n;
  throw InfeasibleError(msg.str());
}

GaussianSmoother::GaussianSmoother(double sigma, int dim, std::size_t half_count,
                                   std::uint64_t key)
    : sigma_(sigma), dim_(dim), half_(half_count) {
  if (!(sigma >= 0.0)) throw ConfigError("smoothing sigma must be non-negative");
  if (half_count == 0) throw ConfigError("smoother needs at least one sample");
  points_ = std::make_shared<NormalPointSet>(dim, half_count, key);
  double acc = 0.0;
  for (std::size_t i = 0; i < half_; ++i) {
    const double* z = points_->point(i);
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) s += z[j] * z[j];
    acc += std::sqrt(s);
  }
  mean_norm_ = acc / static_cast<double>(half_);
}

GaussianSmoother mollify_lipschitz(double fn_lip, double target_sup_err, int d,
                                   std::size_t half_count, std::uint64_t key) {
  if (!(fn_lip >= 0.0)) throw ConfigError("Lipschitz constant must be non-negative");
  if (!(target_sup_err > 0.0)) throw ConfigError("smoothing target must be positive");
  if (fn_lip == 0.0) return GaussianSmoother(0.0, d, half_count, key);
  GaussianSmoother probe(1.0, d, half_count, key);
  const double spread = std::max(std::sqrt(static_cast<double>(d)), probe.mean_norm());
  return GaussianSmoother(target_sup_err / (fn_lip * spread), d, half_count, key);
}

}  // namespace fineapprox
