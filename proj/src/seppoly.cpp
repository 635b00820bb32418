#include "fineapprox/seppoly.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

// x^{2n} for an integer exponent, by repeated squaring.
double ipow(double x, int e) {
  double result = 1.0;
  double base = x;
  while (e > 0) {
    if (e & 1) result *= base;
    base *= base;
    e >>= 1;
  }
  return result;
}

// ((1+t)^{2n} - 1)^{1/2n} evaluated without cancellation for small t.
double power_gap_root(double t, int n) {
  const double two_n = 2.0 * n;
  const double gap = std::expm1(two_n * std::log1p(t));
  return std::pow(gap, 1.0 / two_n);
}

}  // namespace

FormKind form_kind_from_string(std::string_view name) {
  if (name == "euclidean_power") return FormKind::euclidean_power;
  if (name == "even_power_sum") return FormKind::even_power_sum;
  throw ConfigError("unsupported separating form kind: " + std::string(name));
}

std::string_view to_string(FormKind kind) {
  return kind == FormKind::euclidean_power ? "euclidean_power" : "even_power_sum";
}

SeparatingForm SeparatingForm::make(FormKind kind, int dim, int half_degree) {
  if (dim < 1) throw ConfigError("separating form needs dim >= 1");
  if (half_degree < 1) throw ConfigError("separating form needs half_degree >= 1");
  const double a = kind == FormKind::euclidean_power ? 1.0 : static_cast<double>(dim);
  return SeparatingForm(kind, dim, half_degree, a);
}

void SeparatingForm::check_dim(ConstSpan x) const {
  if (static_cast<int>(x.size()) != dim_) {
    throw ContractViolation("dimension mismatch: form has d=" + std::to_string(dim_) +
                            ", got " + std::to_string(x.size()));
  }
}

double SeparatingForm::q(ConstSpan x) const {
  check_dim(x);
  if (kind_ == FormKind::euclidean_power) return ipow(dot(x, x), n_);
  double s = 0.0;
  for (double xi : x) s += ipow(xi * xi, n_);
  return s;
}

void SeparatingForm::q_grad(ConstSpan x, MutSpan out) const {
  check_dim(x);
  if (kind_ == FormKind::euclidean_power) {
    // d/dx (|x|^2)^n = 2n (|x|^2)^{n-1} x
    const double scale = 2.0 * n_ * ipow(dot(x, x), n_ - 1);
    for (int i = 0; i < dim_; ++i) out[i] = scale * x[i];
    return;
  }
  for (int i = 0; i < dim_; ++i) out[i] = 2.0 * n_ * ipow(x[i] * x[i], n_ - 1) * x[i];
}

Vec SeparatingForm::q_grad(ConstSpan x) const {
  Vec g(dim_);
  q_grad(x, g);
  return g;
}

double SeparatingForm::norm(ConstSpan x) const {
  if (reference_norm() == RefNorm::euclidean) return euclidean_norm(x);
  double m = 0.0;
  for (double xi : x) m = std::max(m, std::abs(xi));
  return m;
}

QFunc::QFunc(SeparatingForm form) : form_(form) {
  // Euclidean power: |grad Q| = (t^{2n}/(t^{2n}+1))^{(2n-1)/2n} < 1.
  // Even power sum: the l1 norm of grad Q is at most d^{1/2n} by Hoelder.
  if (form_.kind() == FormKind::euclidean_power) {
    lip_ = 1.0;
  } else {
    lip_ = std::pow(static_cast<double>(form_.dim()), 1.0 / (2.0 * form_.half_degree()));
  }
  padded_lip_ = std::max(lip_, 1.0 + 1e-6);
}

double QFunc::value(ConstSpan x) const {
  const double qv = form_.q(x);
  return std::expm1(std::log1p(qv) / (2.0 * form_.half_degree()));
}

double QFunc::value_grad(ConstSpan x, MutSpan grad) const {
  const double qv = form_.q(x);
  const double two_n = 2.0 * form_.half_degree();
  const double lq = std::log1p(qv);
  form_.q_grad(x, grad);
  const double scale = std::exp((1.0 / two_n - 1.0) * lq) / two_n;
  for (double& g : grad) g *= scale;
  return std::expm1(lq / two_n);
}

Vec QFunc::grad(ConstSpan x) const {
  Vec g(form_.dim());
  value_grad(x, g);
  return g;
}

double QFunc::distance(ConstSpan y, ConstSpan center) const {
  Vec diff(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) diff[i] = y[i] - center[i];
  return value(diff);
}

double QFunc::distance_grad(ConstSpan y, ConstSpan center, MutSpan grad) const {
  Vec diff(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) diff[i] = y[i] - center[i];
  return value_grad(diff, grad);
}

double QFunc::delta(double t) const { return power_gap_root(std::abs(t), form_.half_degree()); }

double QFunc::enclosing_radius(double t) const {
  return power_gap_root(std::max(t, 0.0), form_.half_degree());
}

double QFunc::inscribed_radius(double t) const {
  const double two_n = 2.0 * form_.half_degree();
  const double gap = std::expm1(two_n * std::log1p(std::max(t, 0.0)));
  return std::pow(gap / form_.equivalence_constant(), 1.0 / two_n);
}

double QFunc::body_level_for_inscribed(double s) const {
  const double two_n = 2.0 * form_.half_degree();
  const double qv = form_.equivalence_constant() * std::pow(s, two_n);
  return std::expm1(std::log1p(qv) / two_n);
}

bool QFunc::contains(ConstSpan center, double rho, ConstSpan y) const {
  return distance(y, center) < rho;
}

double choose_r(const QFunc& qf, double rho, double r_cap) {
  if (!(rho > 0.0)) throw ConfigError("choose_r needs rho > 0");
  if (!(r_cap > 0.0 && r_cap <= 1.0)) throw ConfigError("choose_r needs 0 < r_cap <= 1");
  const double two_n = 2.0 * qf.form().half_degree();
  // enclosing_radius(5r) = rho  <=>  (1+5r)^{2n} = 1 + rho^{2n}
  const double p = two_n * std::log(rho);
  const double lp = p > 700.0 ? p : std::log1p(std::exp(p));
  double r = std::expm1(lp / two_n) / 5.0;
  r = std::min({r, r_cap, 1.0 - 1e-9});
  while (r > 0.0 && qf.enclosing_radius(5.0 * r) > rho) r = std::nextafter(r, 0.0);
  if (!(r >= 1e-12)) {
    std::ostringstream msg;
    msg << "choose_r: no feasible r >= 1e-12 for rho=" << rho << " (closed form gives r=" << r
        << ")";
    throw InfeasibleError(msg.str());
  }
  return r;
}

CenterOrdering ordering_from_string(std::string_view name) {
  if (name == "center_out") return CenterOrdering::center_out;
  if (name == "lexicographic") return CenterOrdering::lexicographic;
  throw ConfigError("unknown center ordering: " + std::string(name));
}

std::string_view to_string(CenterOrdering ordering) {
  return ordering == CenterOrdering::center_out ? "center_out" : "lexicographic";
}

double lattice_spacing(const QFunc& qf, double r) {
  const double s = qf.inscribed_radius(r);
  if (qf.form().reference_norm() == RefNorm::sup) return s;
  // Half-diagonal h*sqrt(d)/2 stays strictly below s.
  return s * std::min(1.0, 1.9 / std::sqrt(static_cast<double>(qf.dim())));
}

namespace {

struct AxisLattice {
  std::vector<std::size_t> counts;
  std::vector<double> steps;
};

AxisLattice axis_lattice(const QFunc& qf, const Box& box, double r, double spacing_scale) {
  const double h = lattice_spacing(qf, r) * spacing_scale;
  AxisLattice lat;
  for (const auto& iv : box) {
    const double w = iv.width();
    if (w <= 0.0) {
      lat.counts.push_back(1);
      lat.steps.push_back(0.0);
      continue;
    }
    const double cells = std::ceil(w / h);
    if (!(cells < 1e9)) throw InfeasibleError("covering lattice too fine for the box");
    const auto count = static_cast<std::size_t>(cells) + 1;
    lat.counts.push_back(count);
    lat.steps.push_back(w / static_cast<double>(count - 1));
  }
  return lat;
}

void check_box(const Box& box, int d) {
  if (static_cast<int>(box.size()) != d) throw ContractViolation("box dimension mismatch");
  for (const auto& iv : box) {
    if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo <= iv.hi)) {
      throw ConfigError("box must have finite intervals with lo <= hi");
    }
  }
}

}  // namespace

std::size_t lattice_count(const QFunc& qf, const Box& box, double r) {
  check_box(box, qf.dim());
  const auto lat = axis_lattice(qf, box, r, 1.0);
  double total = 1.0;
  for (auto c : lat.counts) total *= static_cast<double>(c);
  if (total > 1e15) throw InfeasibleError("covering lattice too large");
  return static_cast<std::size_t>(total);
}

Covering build_covering(const QFunc& qf, const Box& box, double r, CenterOrdering ordering,
                        double spacing_scale) {
  if (!(r > 0.0 && r < 1.0)) throw ConfigError("covering radius must lie in (0,1)");
  check_box(box, qf.dim());
  const int d = qf.dim();
  const auto lat = axis_lattice(qf, box, r, spacing_scale);
  double total_d = 1.0;
  for (auto c : lat.counts) total_d *= static_cast<double>(c);
  if (total_d > 5e6) throw InfeasibleError("covering would need more than 5e6 centers");
  const auto total = static_cast<std::size_t>(total_d);

  auto lattice_point = [&](std::size_t flat) {
    Vec p(d);
    for (int i = d - 1; i >= 0; --i) {
      const std::size_t idx = flat % lat.counts[i];
      flat /= lat.counts[i];
      p[i] = lat.counts[i] == 1 ? 0.5 * (box[i].lo + box[i].hi)
                                : (idx + 1 == lat.counts[i] ? box[i].hi
                                                            : box[i].lo + idx * lat.steps[i]);
    }
    return p;
  };

  std::vector<Vec> lex(total);
  for (std::size_t f = 0; f < total; ++f) lex[f] = lattice_point(f);

  // Coverage check on a probe grid of about 1e4 points; nearest lattice node first.
  int live_axes = 0;
  for (auto c : lat.counts) live_axes += c > 1 ? 1 : 0;
  const auto per_axis = static_cast<std::size_t>(
      live_axes == 0 ? 1 : std::max(2.0, std::ceil(std::pow(1e4, 1.0 / live_axes))));
  std::vector<std::size_t> probe_counts(d);
  std::size_t probe_total = 1;
  for (int i = 0; i < d; ++i) {
    probe_counts[i] = lat.counts[i] > 1 ? per_axis : 1;
    probe_total *= probe_counts[i];
  }
  std::vector<Vec> uncovered;
  std::size_t uncovered_count = 0;
  Vec probe(d);
  for (std::size_t f = 0; f < probe_total; ++f) {
    std::size_t rest = f;
    std::size_t nearest = 0;
    std::size_t stride = 1;
    for (int i = d - 1; i >= 0; --i) {
      const std::size_t idx = rest % probe_counts[i];
      rest /= probe_counts[i];
      probe[i] = probe_counts[i] == 1
                     ? 0.5 * (box[i].lo + box[i].hi)
                     : box[i].lo + box[i].width() * static_cast<double>(idx) /
                                       static_cast<double>(probe_counts[i] - 1);
      std::size_t li = 0;
      if (lat.counts[i] > 1) {
        const double u = std::round((probe[i] - box[i].lo) / lat.steps[i]);
        li = static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(lat.counts[i] - 1)));
      }
      nearest += li * stride;
      stride *= lat.counts[i];
    }
    bool ok = qf.distance(probe, lex[nearest]) < r;
    for (std::size_t c = 0; !ok && c < total; ++c) ok = qf.distance(probe, lex[c]) < r;
    if (!ok) {
      ++uncovered_count;
      if (uncovered.size() < 10) uncovered.push_back(probe);
    }
  }
  if (uncovered_count > 0) {
    std::ostringstream msg;
    msg << "covering check failed: " << uncovered_count << " of " << probe_total
        << " probe points uncovered at r=" << r << "; first:";
    for (const auto& p : uncovered) {
      msg << " (";
      for (int i = 0; i < d; ++i) msg << (i ? "," : "") << p[i];
      msg << ")";
    }
    throw ConstructionError(msg.str());
  }

  if (ordering == CenterOrdering::center_out) {
    Vec mid(d);
    for (int i = 0; i < d; ++i) mid[i] = 0.5 * (box[i].lo + box[i].hi);
    std::vector<double> dist(total);
    for (std::size_t f = 0; f < total; ++f) {
      Vec diff(d);
      for (int i = 0; i < d; ++i) diff[i] = lex[f][i] - mid[i];
      dist[f] = qf.form().norm(diff);
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Lattice order already breaks ties lexicographically.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    std::vector<Vec> sorted(total);
    for (std::size_t f = 0; f < total; ++f) sorted[f] = lex[order[f]];
    lex = std::move(sorted);
  }

  Covering cov{box, r, ordering, std::move(lex), qf, {}};
  cov.mn_bounds.resize(cov.size());
  for (std::size_t k = 0; k < cov.size(); ++k) cov.mn_bounds[k] = compute_mn_bound(cov, k);
  return cov;
}

double compute_mn_bound(const Covering& covering, std::size_t k) {
  if (k >= covering.size()) throw ContractViolation("compute_mn_bound: index out of range");
  const auto& qf = covering.qfunc;
  double m = 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    m = std::max(m, qf.distance(covering.centers[k], covering.centers[j]));
  }
  return m + qf.padded_lipschitz() * qf.enclosing_radius(4.0 * covering.r);
}

std::string format_double17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json to_json(const Covering& covering) {
  const auto& form = covering.qfunc.form();
  nlohmann::json doc;
  doc["kind"] = std::string(to_string(form.kind()));
  doc["d"] = form.dim();
  doc["n"] = form.half_degree();
  doc["A"] = form.equivalence_constant();
  nlohmann::json box = nlohmann::json::array();
  for (const auto& iv : covering.box) box.push_back({iv.lo, iv.hi});
  doc["box"] = box;
  doc["r"] = covering.r;
  doc["ordering"] = std::string(to_string(covering.ordering));
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& c : covering.centers) {
    nlohmann::json row = nlohmann::json::array();
    for (double v : c) row.push_back(format_double17(v));
    centers.push_back(row);
  }
  doc["centers"] = centers;
  doc["mn_bounds"] = covering.mn_bounds;
  return doc;
}

Covering covering_from_json(const nlohmann::json& doc) {
  const auto form = SeparatingForm::make(form_kind_from_string(doc.at("kind").get<std::string>()),
                                         doc.at("d").get<int>(), doc.at("n").get<int>());
  QFunc qf(form);
  Box box;
  for (const auto& iv : doc.at("box")) box.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  std::vector<Vec> centers;
  for (const auto& row : doc.at("centers")) {
    Vec c;
    for (const auto& v : row) c.push_back(std::stod(v.get<std::string>()));
    if (static_cast<int>(c.size()) != form.dim()) {
      throw ConfigError("covering center has wrong dimension");
    }
    centers.push_back(std::move(c));
  }
  Covering cov{std::move(box), doc.at("r").get<double>(),
               ordering_from_string(doc.at("ordering").get<std::string>()), std::move(centers), qf,
               {}};
  cov.mn_bounds.resize(cov.size());
  for (std::size_t k = 0; k < cov.size(); ++k) cov.mn_bounds[k] = compute_mn_bound(cov, k);
  return cov;
}

}  // namespace fineapprox
