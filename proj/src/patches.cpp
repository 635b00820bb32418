#include "fineapprox/patches.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "fineapprox/bumps1d.hpp"
#include "fineapprox/error.hpp"
#include "fineapprox/qmc.hpp"

namespace fineapprox {

namespace {

double ref_norm(RefNorm kind, ConstSpan v) {
  if (kind == RefNorm::euclidean) return euclidean_norm(v);
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// A (sub)gradient of the reference norm at v != 0.
void ref_norm_grad(RefNorm kind, ConstSpan v, MutSpan g) {
  std::fill(g.begin(), g.end(), 0.0);
  if (kind == RefNorm::euclidean) {
    const double n = euclidean_norm(v);
    if (n > 0.0) {
      for (std::size_t i = 0; i < v.size(); ++i) g[i] = v[i] / n;
    }
    return;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] != 0.0) g[best] = v[best] > 0.0 ? 1.0 : -1.0;
}

// Unit directions used to sample the boundary of each D_n.
std::vector<Vec> ring_directions(int d) {
  std::vector<Vec> dirs;
  if (d == 1) {
    dirs = {{1.0}, {-1.0}};
  } else if (d == 2) {
    const int count = 1024;
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else {
    NormalPointSet pts(d, 2048, 0x0d1ec7ull);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Vec v(pts.point(i), pts.point(i) + d);
      const double n = euclidean_norm(v);
      if (!(n > 0.0)) continue;
      for (double& x : v) x /= n;
      dirs.push_back(std::move(v));
    }
  }
  return dirs;
}

}  // namespace

double TaylorPatch::eval(ConstSpan x) const {
  double v = value;
  for (std::size_t i = 0; i < center.size(); ++i) v += gradient[i] * (x[i] - center[i]);
  return v;
}

double mcshane_extend(const std::vector<Vec>& points, const Vec& values, double lip, double bound,
                      ConstSpan x, RefNorm norm) {
  if (points.empty() || points.size() != values.size()) {
    throw ContractViolation("mcshane_extend needs matching non-empty samples");
  }
  double best = std::numeric_limits<double>::infinity();
  Vec diff(x.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) diff[j] = x[j] - points[i][j];
    best = std::min(best, values[i] + lip * ref_norm(norm, diff));
  }
  return std::clamp(best, -bound, bound);
}

PatchSet::PatchSet(const Covering& covering, Target f, PatchOptions options)
    : covering_(covering), f_(std::move(f)), options_(std::move(options)) {
  const int d = covering_.dim();
  const double r = covering_.r;
  if (f_.dim != d) throw ContractViolation("target dimension does not match the covering");
  if (!(options_.eps_prime > 0.0)) throw ConfigError("eps' must be positive");
  if (!(options_.phi_lipschitz > 0.0)) throw ConfigError("phi Lipschitz constant must be positive");
  if (!options_.nu_tolerance) throw ConfigError("nu tolerance function missing");

  const QFunc& qf = covering_.qfunc;
  const SeparatingForm& form = qf.form();
  const int n2 = 2 * form.half_degree();
  body_radius_ = qf.enclosing_radius(5.0 * r);
  body_q_level_ = std::pow(1.0 + 5.0 * r, n2) - 1.0;

  // Lip(T_n - f) on D_n: |f'(x_n) - f'(y)| <= M2 |x_n - y| and <= 2L, converted to
  // the reference norm.
  const bool sup = form.reference_norm() == RefNorm::sup;
  const double c_m2 = sup ? d : 1.0;
  const double c_l = sup ? std::sqrt(static_cast<double>(d)) : 1.0;
  lip_ = std::max(options_.eps_prime,
                  std::min(options_.m2 * body_radius_ * c_m2, 2.0 * options_.lip_f * c_l));
  bound_ = lip_ * body_radius_;

  const auto dirs = ring_directions(d);
  Vec g(d);
  for (const auto& c : covering_.centers) {
    TaylorPatch tp;
    tp.center = c;
    tp.gradient.assign(d, 0.0);
    tp.value = f_.value_grad(c, tp.gradient);
    patches_.push_back(std::move(tp));
    const TaylorPatch& p = patches_.back();

    std::vector<Vec> pts;
    Vec vals;
    for (const auto& v : dirs) {
      const double t = std::pow(body_q_level_ / form.q(v), 1.0 / n2) * (1.0 - 1e-12);
      Vec y(d);
      for (int i = 0; i < d; ++i) y[i] = c[i] + t * v[i];
      vals.push_back(p.eval(y) - f_.value_grad(y, g));
      pts.push_back(std::move(y));
    }
    samples_.push_back(std::move(pts));
    sample_values_.push_back(std::move(vals));
  }

  delta_target_ = options_.eps_prime * r / options_.phi_lipschitz;
  smoother_ = mollify_lipschitz(lip_, delta_target_, d, options_.delta_half_samples,
                                options_.delta_key);

  const PiecewisePoly nubar = make_nubar(r);
  if (options_.saved_kappa.kappa > 0.0) {
    kappa_sel_ = options_.saved_kappa;
  } else {
    kappa_sel_ = select_kappa(nubar, options_.nu_tolerance, -12.0 * r, 12.0 * r,
                              options_.nu_probe_count);
  }
  nu_ = Conv1D(nubar, kappa_sel_.kappa);
}

double PatchSet::h_eval(std::size_t n, ConstSpan x) const {
  Vec g(x.size());
  return patches_.at(n).eval(x) - f_.value_grad(x, g);
}

void PatchSet::boundary_point(std::size_t n, ConstSpan w, Vec& p) const {
  const SeparatingForm& form = covering_.qfunc.form();
  const int n2 = 2 * form.half_degree();
  const Vec& c = covering_.centers[n];
  const double t = std::pow(body_q_level_ / form.q(w), 1.0 / n2) * (1.0 - 1e-12);
  p.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) p[i] = c[i] + t * w[i];
}

double PatchSet::refine(std::size_t n, ConstSpan x, Vec w, Vec& p) const {
  const int d = covering_.dim();
  const RefNorm norm = covering_.qfunc.form().reference_norm();
  const TaylorPatch& tp = patches_[n];
  Vec fg(d), diff(d), trial(d), q;
  auto objective = [&](ConstSpan dir) {
    boundary_point(n, dir, q);
    for (int j = 0; j < d; ++j) diff[j] = x[j] - q[j];
    return tp.eval(q) - f_.value_grad(q, fg) + lip_ * ref_norm(norm, diff);
  };
  const double wn = euclidean_norm(w);
  for (double& v : w) v /= wn;
  double best = objective(w);
  // Cyclic line searches along great circles through w; the span shrinks
  // from about twice the ring spacing.
  double span = d == 2 ? 4.0 * std::numbers::pi / 1024.0 : 0.5;
  for (int round = 0; round < (d == 2 ? 2 : 3); ++round, span *= 0.5) {
    for (int axis = 0; axis < d; ++axis) {
      Vec e(d, 0.0);
      e[axis] = 1.0;
      const double proj = dot(e, w);
      for (int j = 0; j < d; ++j) e[j] -= proj * w[j];
      const double en = euclidean_norm(e);
      if (en < 0.5) continue;
      for (double& v : e) v /= en;
      auto along = [&](double s) {
        for (int j = 0; j < d; ++j) trial[j] = std::cos(s) * w[j] + std::sin(s) * e[j];
        return objective(trial);
      };
      const auto [s, v] = boost::math::tools::brent_find_minima(along, -span, span, 40);
      if (v < best) {
        best = v;
        for (int j = 0; j < d; ++j) w[j] = std::cos(s) * w[j] + std::sin(s) * e[j];
        const double nn = euclidean_norm(w);
        for (double& c : w) c /= nn;
      }
    }
  }
  boundary_point(n, w, p);
  return best;
}

template <bool WithGrad>
double PatchSet::eps_at(std::size_t n, ConstSpan x, double* grad) const {
  const int d = covering_.dim();
  const TaylorPatch& tp = patches_[n];
  const RefNorm norm = covering_.qfunc.form().reference_norm();
  Vec fg(d);

  // Inside D_n the extension coincides with T_n - f.
  if (covering_.qfunc.distance(x, tp.center) < 5.0 * covering_.r) {
    const double h = tp.eval(x) - f_.value_grad(x, fg);
    if (WithGrad) {
      for (int i = 0; i < d; ++i) grad[i] = tp.gradient[i] - fg[i];
    }
    if (h > bound_ || h < -bound_) {
      if (WithGrad) std::fill(grad, grad + d, 0.0);
      return std::clamp(h, -bound_, bound_);
    }
    return h;
  }

  // Outside: inf over boundary samples and the radial projection of x onto
  // the boundary. Both lie in the closure of D_n where the extension is h.
  double best = std::numeric_limits<double>::infinity();
  long best_i = -1;
  Vec diff(d);
  const auto& pts = samples_[n];
  const Vec& vals = sample_values_[n];
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int j = 0; j < d; ++j) diff[j] = x[j] - pts[i][j];
    const double v = vals[i] + lip_ * ref_norm(norm, diff);
    if (v < best) {
      best = v;
      best_i = static_cast<long>(i);
    }
  }
  // The inf is over the boundary sphere; refine locally from the best ring
  // sample and from the radial direction. Each candidate is h(p) + lip |x - p|
  // for a boundary point p, so the gradient is lip times a norm gradient.
  const Vec& c = tp.center;
  Vec p_best = best_i >= 0 ? pts[best_i] : Vec{};
  if (d >= 2) {
    Vec w(d), p;
    for (int j = 0; j < d; ++j) w[j] = x[j] - c[j];
    if (euclidean_norm(w) > 0.0) {
      const double v = refine(n, x, w, p);
      if (v < best) {
        best = v;
        p_best = p;
      }
    }
    if (best_i >= 0) {
      for (int j = 0; j < d; ++j) w[j] = pts[best_i][j] - c[j];
      const double v = refine(n, x, w, p);
      if (v < best) {
        best = v;
        p_best = p;
      }
    }
  }

  const bool clipped = best > bound_ || best < -bound_;
  if (WithGrad) {
    std::fill(grad, grad + d, 0.0);
    if (!clipped && !p_best.empty()) {
      Vec gw(d);
      for (int j = 0; j < d; ++j) diff[j] = x[j] - p_best[j];
      ref_norm_grad(norm, diff, gw);
      for (int j = 0; j < d; ++j) grad[j] = lip_ * gw[j];
    }
  }
  return std::clamp(best, -bound_, bound_);
}

double PatchSet::epsilon_eval(std::size_t n, ConstSpan x) const {
  return eps_at<false>(n, x, nullptr);
}

double PatchSet::epsilon_grad(std::size_t n, ConstSpan x, MutSpan grad) const {
  return eps_at<true>(n, x, grad.data());
}

double PatchSet::delta_eval(std::size_t n, ConstSpan x) const {
  return smoother_.value(x, [&](ConstSpan y) { return eps_at<false>(n, y, nullptr); });
}

double PatchSet::delta_grad(std::size_t n, ConstSpan x, MutSpan grad) const {
  return smoother_.value_grad(
      x, [&](ConstSpan y, MutSpan g) { return eps_at<true>(n, y, g.data()); }, grad);
}

double PatchSet::nu_eval(std::size_t n, ConstSpan x) const {
  return nu_.eval(covering_.qfunc.distance(x, covering_.centers.at(n)));
}

double PatchSet::nu_grad(std::size_t n, ConstSpan x, MutSpan grad) const {
  const double q = covering_.qfunc.distance_grad(x, covering_.centers.at(n), grad);
  const double dn = nu_.deriv(q);
  for (double& g : grad) g *= dn;
  return nu_.eval(q);
}

double PatchSet::sampled_h_max(std::size_t n) const {
  double m = 0.0;
  for (double v : sample_values_.at(n)) m = std::max(m, std::abs(v));
  return m;
}

nlohmann::json PatchSet::to_json() const {
  nlohmann::json j;
  j["patch_lipschitz"] = lip_;
  j["bound"] = bound_;
  j["body_radius"] = body_radius_;
  j["delta_sigma"] = smoother_.sigma();
  j["delta_samples"] = smoother_.samples();
  j["delta_key"] = options_.delta_key;
  j["delta_target"] = delta_target_;
  j["kappa"] = kappa_sel_.kappa;
  j["kappa_doublings"] = kappa_sel_.doublings;
  j["nu_worst_value_err"] = kappa_sel_.worst_value_err;
  j["nu_worst_deriv_err"] = kappa_sel_.worst_deriv_err;
  j["nu_worst_t"] = kappa_sel_.worst_t;
  j["ring_samples"] = samples_.empty() ? 0 : samples_[0].size();
  return j;
}

}  // namespace fineapprox
