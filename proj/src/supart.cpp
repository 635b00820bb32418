#include "fineapprox/supart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "fineapprox/error.hpp"
#include "fineapprox/smoothsup.hpp"

namespace fineapprox {

namespace {

constexpr double kSmoothstepSecond = 5.7735026918962576;  // max |S''| = 10/sqrt(3)

double dual_norm(const QFunc& qf, const double* g) {
  const int d = qf.dim();
  double s = 0.0;
  if (qf.form().reference_norm() == RefNorm::euclidean) {
    for (int i = 0; i < d; ++i) s += g[i] * g[i];
    return std::sqrt(s);
  }
  for (int i = 0; i < d; ++i) s += std::abs(g[i]);
  return s;
}

std::size_t sample_count(std::size_t dims) { return dims <= 8 ? (1u << 13) : (1u << 14); }

}  // namespace

void PhiFamily::init_common() {
  const std::size_t n = covering_.size();
  if (n == 0) throw ContractViolation("sup-partition needs at least one center");
  if (n > kMaxFamilySize) {
    std::ostringstream msg;
    msg << "sup-partition supports at most " << kMaxFamilySize << " centers, got " << n;
    throw ConfigError(msg.str());
  }
  if (!(options_.eps1 > 0.0)) throw ConfigError("eps1 must be positive");
  const double r = covering_.r;
  mu_ = make_mu(options_.eps1);
  bhat_ = make_bhat(r);
  m_b_ = smooth_sup_degree(n, options_.a1_target);
  a_b_ = smooth_sup_constant(n, m_b_);
  l1_ = 15.0 / 8.0 * mu_lipschitz(options_.eps1) * a_b_;
  l_phi_ = l1_ * covering_.qfunc.padded_lipschitz() / r;
  bn_lip_ = mu_lipschitz(options_.eps1) * a_b_ * profile_lipschitz(r);
  points_ = std::make_shared<NormalPointSet>(static_cast<int>(n), sample_count(n), options_.qmc_key);
  members_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    members_[k].mn_bound = covering_.mn_bounds[k];
    members_[k].profile = make_bn_profile(r, covering_.mn_bounds[k]);
    members_[k].samples = sample_count(k + 1);
  }
}

double PhiFamily::bn_deriv_lipschitz(std::size_t) const {
  const double r = covering_.r;
  const double b1 = profile_lipschitz(r);
  const double b2 = kSmoothstepSecond / (r * r);
  const double lip_mu = mu_lipschitz(options_.eps1);
  const double m2_mu = (1.0 + options_.eps1) * kSmoothstepSecond * 4.0;
  const double p = 2.0 * m_b_;
  // mu'' term, smooth-sup curvature term (S >= 1/2 wherever mu' != 0), bump curvature term.
  return m2_mu * a_b_ * b1 * b1 + lip_mu * 2.0 * (p - 1.0) * (1.0 + a_b_) * b1 * b1 + lip_mu * b2;
}

PhiFamily::PhiFamily(Covering covering, const PhiOptions& options)
    : covering_(std::move(covering)), options_(options) {
  init_common();
  for (std::size_t k = 0; k < members_.size(); ++k) {
    MemberRecord rec;
    if (options_.k_override > 0.0) {
      rec.kernel_k = options_.k_override;
      double s = 0.0;
      for (double sig : kernel_sigmas(static_cast<int>(k + 1), rec.kernel_k)) s += sig;
      rec.certified_error = std::max(bn_lip_, bn_deriv_lipschitz(k)) * s * std::sqrt(2.0 / std::numbers::pi);
      rec.spot_check_error = spot_check(k, rec.kernel_k, &rec.qmc_error);
    } else {
      double qmc_err = 0.0;
      const auto sel = select_k(bn_lip_, bn_deriv_lipschitz(k), options_.eps1,
                                static_cast<int>(k + 1),
                                [&](double kk) { return spot_check(k, kk, &qmc_err); });
      rec.kernel_k = sel.k;
      rec.certified_error = sel.certified_error;
      rec.spot_check_error = sel.spot_check_error;
      rec.qmc_error = qmc_err;
    }
    build_member(k, rec);
  }
}

PhiFamily::PhiFamily(Covering covering, const PhiOptions& options,
                     const std::vector<MemberRecord>& records)
    : covering_(std::move(covering)), options_(options) {
  init_common();
  if (records.size() != members_.size()) {
    throw ConfigError("saved sup-partition has the wrong number of members");
  }
  for (std::size_t k = 0; k < members_.size(); ++k) build_member(k, records[k]);
}

void PhiFamily::build_member(std::size_t k, const MemberRecord& rec) {
  auto& m = members_[k];
  m.kernel_k = rec.kernel_k;
  m.certified_error = rec.certified_error;
  m.spot_check_error = rec.spot_check_error;
  m.qmc_error = rec.qmc_error;
  m.expect = GaussExpect(kernel_sigmas(static_cast<int>(k + 1), rec.kernel_k), points_, m.samples);
}

template <bool WithGrad>
double PhiFamily::bump(std::size_t k, const double* y, double* grad) const {
  const auto& prof = members_[k].profile;
  double vals[kMaxFamilySize];
  double top = 0.0;
  auto zero_out = [&] {
    if constexpr (WithGrad) std::fill(grad, grad + k + 1, 0.0);
  };
  for (std::size_t j = 0; j <= k; ++j) {
    const double v = std::abs(j < k ? prof.eval(y[j]) : bhat_.eval(y[j]));
    if (v >= 1.0) {
      zero_out();
      return 0.0;
    }
    vals[j] = v;
    top = std::max(top, v);
  }
  if (top == 0.0) {
    zero_out();
    return mu_.eval(0.0);
  }
  const int p = 2 * m_b_;
  double sum = 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    if (vals[j] != 0.0) sum += int_pow(vals[j] / top, p);
  }
  const double s = top * std::pow(sum, 1.0 / p);
  const double value = mu_.eval(s);
  if constexpr (WithGrad) {
    const double dmu = mu_.deriv(s);
    for (std::size_t j = 0; j <= k; ++j) {
      if (dmu == 0.0 || vals[j] == 0.0) {
        grad[j] = 0.0;
        continue;
      }
      const double dv = j < k ? prof.deriv(y[j]) : bhat_.deriv(y[j]);
      grad[j] = dmu * int_pow(vals[j] / s, p - 1) * dv;
    }
  }
  return value;
}

double PhiFamily::bn_eval(std::size_t k, ConstSpan y) const {
  if (k >= size() || y.size() != k + 1) throw ContractViolation("bn_eval: dimension mismatch");
  return bump<false>(k, y.data(), nullptr);
}

double PhiFamily::bn_grad(std::size_t k, ConstSpan y, MutSpan grad) const {
  if (k >= size() || y.size() != k + 1 || grad.size() != k + 1) {
    throw ContractViolation("bn_grad: dimension mismatch");
  }
  return bump<true>(k, y.data(), grad.data());
}

double PhiFamily::spot_check(std::size_t k, double kernel_k, double* qmc_err) const {
  const double r = covering_.r;
  const double mk = members_[k].mn_bound;
  const std::size_t dims = k + 1;
  const std::size_t probes = std::max<std::size_t>(16, options_.spot_probes / size());
  const Vec sigma = kernel_sigmas(static_cast<int>(dims), kernel_k);
  const std::size_t samples = members_[k].samples;
  std::mt19937_64 rng(options_.qmc_key ^ (0x9e3779b97f4a7c15ull * (k + 1)));
  std::uniform_real_distribution<double> last(-1.0 - 1.5 * r, 4.5 * r);
  std::uniform_real_distribution<double> inner(1.5 * r, mk + 2.5 * r);
  std::uniform_real_distribution<double> plateau(3.0 * r, mk + r);
  double worst = 0.0;
  double worst_qmc = 0.0;
  Vec y(dims), yy(dims), g(dims), acc_g(dims), half_g(dims), bg(dims);
  for (std::size_t i = 0; i < probes; ++i) {
    // Half of the probes sit on the zero plateaus of the first k profiles,
    // so the last coordinate's transitions are exercised.
    for (std::size_t j = 0; j < k; ++j) y[j] = (i % 2 == 0) ? plateau(rng) : inner(rng);
    y[k] = last(rng);
    double acc = 0.0;
    double half_acc = 0.0;
    std::fill(acc_g.begin(), acc_g.end(), 0.0);
    for (std::size_t s = 0; s < samples; ++s) {
      const double* z = points_->point(s);
      for (std::size_t j = 0; j < dims; ++j) yy[j] = y[j] + sigma[j] * z[j];
      acc += bump<true>(k, yy.data(), g.data());
      for (std::size_t j = 0; j < dims; ++j) acc_g[j] += g[j];
      if (s + 1 == samples / 2) {
        half_acc = acc;
        half_g = acc_g;
      }
    }
    const double inv = 1.0 / static_cast<double>(samples);
    const double b = bump<true>(k, y.data(), bg.data());
    double err = std::abs(acc * inv - b);
    double qerr = std::abs(acc * inv - 2.0 * inv * half_acc);
    for (std::size_t j = 0; j < dims; ++j) {
      err = std::max(err, std::abs(acc_g[j] * inv - bg[j]));
      qerr = std::max(qerr, std::abs(acc_g[j] * inv - 2.0 * inv * half_g[j]));
    }
    worst = std::max(worst, err);
    worst_qmc = std::max(worst_qmc, qerr);
  }
  if (qmc_err) *qmc_err = worst_qmc;
  return worst;
}

Vec PhiFamily::qdistances(ConstSpan x) const {
  Vec q(size());
  for (std::size_t j = 0; j < size(); ++j) q[j] = covering_.qfunc.distance(x, covering_.centers[j]);
  return q;
}

bool PhiFamily::vanishes(std::size_t k, ConstSpan qdist) const {
  const double r = covering_.r;
  const auto& shift = members_[k].expect.max_shift();
  auto guard = [](double q) { return 4e-16 * (1.0 + std::abs(q)); };
  if (qdist[k] - shift[k] - guard(qdist[k]) >= 4.0 * r) return true;
  const double mk = members_[k].mn_bound;
  for (std::size_t j = 0; j < k; ++j) {
    if (qdist[j] + shift[j] + guard(qdist[j]) <= 2.0 * r) return true;
    if (qdist[j] - shift[j] - guard(qdist[j]) >= mk + 2.0 * r) return true;
  }
  return false;
}

double PhiFamily::phi_from_distances(std::size_t k, ConstSpan qdist, ConstSpan qgrads,
                                     MutSpan grad) const {
  const int d = covering_.dim();
  std::fill(grad.begin(), grad.end(), 0.0);
  if (vanishes(k, qdist)) return 0.0;
  const auto& ge = members_[k].expect;
  Vec hgrad(k + 1);
  const double value = ge.value_grad(
      qdist.first(k + 1),
      [&](ConstSpan y, MutSpan g) { return bump<true>(k, y.data(), g.data()); }, hgrad);
  for (std::size_t j = 0; j <= k; ++j) {
    if (hgrad[j] == 0.0) continue;
    for (int i = 0; i < d; ++i) grad[i] += hgrad[j] * qgrads[j * d + i];
  }
  return value;
}

double PhiFamily::phi_eval(std::size_t k, ConstSpan x) const {
  if (k >= size()) throw ContractViolation("phi_eval: index out of range");
  const Vec q = qdistances(x);
  if (vanishes(k, q)) return 0.0;
  return members_[k].expect.value(ConstSpan(q).first(k + 1),
                                  [&](ConstSpan y) { return bump<false>(k, y.data(), nullptr); });
}

double PhiFamily::phi_grad(std::size_t k, ConstSpan x, MutSpan grad) const {
  if (k >= size()) throw ContractViolation("phi_grad: index out of range");
  const int d = covering_.dim();
  Vec q(size());
  Vec qg(size() * d);
  for (std::size_t j = 0; j <= k; ++j) {
    q[j] = covering_.qfunc.distance_grad(x, covering_.centers[j], MutSpan(qg).subspan(j * d, d));
  }
  return phi_from_distances(k, q, qg, grad);
}

std::size_t PhiFamily::witness_candidate(ConstSpan qdist) const {
  const double r = covering_.r;
  for (std::size_t k = 0; k < size(); ++k) {
    if (qdist[k] < 3.0 * r) return k;
  }
  return size();
}

std::size_t PhiFamily::witness_m(ConstSpan x) const {
  const Vec q = qdistances(x);
  const std::size_t k = witness_candidate(q);
  if (k == size()) {
    std::ostringstream msg;
    msg << "no center within Q-distance 3r of x=(";
    for (std::size_t i = 0; i < x.size(); ++i) msg << (i ? "," : "") << x[i];
    msg << ")";
    throw DomainError(msg.str());
  }
  const double v = phi_eval(k, x);
  if (!(v > 0.5)) {
    std::ostringstream msg;
    msg << "witness phi_" << k << " = " << v << " is not above 1/2";
    throw IntegrityError(msg.str());
  }
  return k;
}

nlohmann::json PhiFamily::to_json() const {
  nlohmann::json doc;
  doc["eps1"] = options_.eps1;
  doc["a1_target"] = options_.a1_target;
  doc["qmc_key"] = options_.qmc_key;
  doc["k_override"] = options_.k_override;
  doc["spot_probes"] = options_.spot_probes;
  doc["smooth_sup_degree"] = m_b_;
  doc["smooth_sup_constant"] = a_b_;
  doc["L1"] = l1_;
  doc["L_phi"] = l_phi_;
  doc["bn_lipschitz"] = bn_lip_;
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t k = 0; k < size(); ++k) {
    const auto& m = members_[k];
    members.push_back({{"kernel_k", m.kernel_k},
                       {"samples", m.samples},
                       {"mn_bound", m.mn_bound},
                       {"sigma", m.expect.sigma()},
                       {"bn_deriv_lipschitz", bn_deriv_lipschitz(k)},
                       {"certified_error", m.certified_error},
                       {"spot_check_error", m.spot_check_error},
                       {"qmc_error", m.qmc_error}});
  }
  doc["members"] = members;
  return doc;
}

PhiFamily PhiFamily::from_json(Covering covering, const nlohmann::json& doc) {
  PhiOptions opt;
  opt.eps1 = doc.at("eps1").get<double>();
  opt.a1_target = doc.at("a1_target").get<double>();
  opt.qmc_key = doc.at("qmc_key").get<std::uint64_t>();
  opt.k_override = doc.value("k_override", 0.0);
  opt.spot_probes = doc.value("spot_probes", std::size_t{1000});
  std::vector<MemberRecord> recs;
  for (const auto& m : doc.at("members")) {
    recs.push_back({m.at("kernel_k").get<double>(), m.at("certified_error").get<double>(),
                    m.at("spot_check_error").get<double>(), m.at("qmc_error").get<double>()});
  }
  return PhiFamily(std::move(covering), opt, recs);
}

PhiSample sample_phi(const PhiFamily& fam, ConstSpan x) {
  const auto& cov = fam.covering();
  const int d = cov.dim();
  const std::size_t n = fam.size();
  PhiSample s;
  s.x.assign(x.begin(), x.end());
  s.phi.assign(n, 0.0);
  s.grad.assign(n * d, 0.0);
  s.qdist.assign(n, 0.0);
  Vec qg(n * d);
  for (std::size_t j = 0; j < n; ++j) {
    s.qdist[j] = cov.qfunc.distance_grad(x, cov.centers[j], MutSpan(qg).subspan(j * d, d));
  }
  for (std::size_t k = 0; k < n; ++k) {
    s.phi[k] = fam.phi_from_distances(k, s.qdist, qg, MutSpan(s.grad).subspan(k * d, d));
  }
  return s;
}

bool PropertyReport::all_pass() const {
  return std::all_of(properties.begin(), properties.end(),
                     [](const PropertyResult& p) { return p.pass; });
}

nlohmann::json PropertyReport::to_json() const {
  nlohmann::json doc;
  nlohmann::json props = nlohmann::json::object();
  for (const auto& p : properties) {
    props[p.name] = {{"pass", p.pass},
                     {"worst_point", p.worst_point},
                     {"worst_value", p.worst_value},
                     {"worst_index", p.worst_index},
                     {"tolerance", p.tolerance},
                     {"checked", p.checked},
                     {"flagged", p.flagged}};
  }
  doc["properties"] = props;
  doc["warnings"] = warnings;
  doc["all_pass"] = all_pass();
  return doc;
}

PropertyReport check_lemma_properties(const PhiFamily& fam, const std::vector<Vec>& grid) {
  std::vector<PhiSample> samples;
  samples.reserve(grid.size());
  for (const auto& x : grid) samples.push_back(sample_phi(fam, x));
  return check_lemma_properties(fam, samples);
}

PropertyReport check_lemma_properties(const PhiFamily& fam, const std::vector<PhiSample>& samples) {
  const auto& cov = fam.covering();
  const auto& qf = cov.qfunc;
  const int d = cov.dim();
  const std::size_t n = fam.size();
  const double r = cov.r;
  const double eps1 = fam.eps1();
  double tol = 0.0;
  for (std::size_t k = 0; k < n; ++k) tol = std::max(tol, 10.0 * fam.member(k).qmc_error);

  PropertyResult lip;
  lip.name = "equi_lipschitz";
  lip.tolerance = fam.lipschitz();
  PropertyResult range;
  range.name = "range";
  range.tolerance = 1.0 + 2.0 * eps1;
  PropertyResult witness;
  witness.name = "witness";
  witness.tolerance = 0.5;
  witness.worst_value = std::numeric_limits<double>::infinity();
  PropertyResult far;
  far.name = "far_value";
  far.tolerance = eps1 + tol;
  PropertyResult far_grad;
  far_grad.name = "far_gradient";
  far_grad.tolerance = eps1 + tol;

  PropertyReport report;
  if (samples.empty()) {
    report.warnings.push_back("empty sample grid: every property holds vacuously");
    witness.worst_value = 0.0;
    report.properties = {lip, range, witness, far, far_grad};
    return report;
  }

  auto note = [](PropertyResult& p, double value, const PhiSample& s, std::size_t k) {
    if (value > p.worst_value) {
      p.worst_value = value;
      p.worst_point = s.x;
      p.worst_index = k;
    }
  };

  double range_min = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    for (std::size_t k = 0; k < n; ++k) {
      const double v = s.phi[k];
      const double gnorm = dual_norm(qf, s.grad.data() + k * d);
      ++lip.checked;
      note(lip, gnorm, s, k);
      ++range.checked;
      note(range, v, s, k);
      range_min = std::min(range_min, v);
      if (v > 1.0 + eps1 + 1e-12 && v <= 1.0 + 2.0 * eps1) ++range.flagged;
      if (!(v >= -tol && v <= 1.0 + 2.0 * eps1)) range.pass = false;
      if (!(s.qdist[k] < 5.0 * r)) {
        ++far.checked;
        ++far_grad.checked;
        note(far, v, s, k);
        note(far_grad, gnorm, s, k);
      }
    }
    ++witness.checked;
    const std::size_t m = fam.witness_candidate(s.qdist);
    const double wv = m < n ? s.phi[m] : -std::numeric_limits<double>::infinity();
    if (wv < witness.worst_value) {
      witness.worst_value = wv;
      witness.worst_point = s.x;
      witness.worst_index = m;
    }
    if (!(wv > 0.5)) witness.pass = false;
  }

  // Secant slopes over consecutive samples and deterministic random pairs.
  auto secant = [&](const PhiSample& a, const PhiSample& b) {
    Vec diff(d);
    for (int i = 0; i < d; ++i) diff[i] = a.x[i] - b.x[i];
    const double dist = qf.form().norm(diff);
    if (!(dist > 0.0)) return;
    for (std::size_t k = 0; k < n; ++k) {
      const double slope = std::abs(a.phi[k] - b.phi[k]) / dist;
      ++lip.checked;
      note(lip, slope, a, k);
    }
  };
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) secant(samples[i], samples[i + 1]);
  std::mt19937_64 rng(20240611ull);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  for (int i = 0; i < 1000; ++i) secant(samples[pick(rng)], samples[pick(rng)]);

  lip.pass = lip.worst_value <= lip.tolerance;
  if (range_min < -tol) {
    range.worst_value = range_min;
  }
  far.pass = far.worst_value <= far.tolerance;
  far_grad.pass = far_grad.worst_value <= far_grad.tolerance;
  if (range.flagged > 0) {
    std::ostringstream msg;
    msg << range.flagged << " phi values lie in (1+eps1, 1+2 eps1]";
    report.warnings.push_back(msg.str());
  }
  if (far.checked == 0) report.warnings.push_back("no sample lies outside any 5r body");
  report.properties = {lip, range, witness, far, far_grad};
  return report;
}

}  // namespace fineapprox
