#include "fineapprox/assemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fineapprox/bumps1d.hpp"
#include "fineapprox/error.hpp"
#include "fineapprox/smoothsup.hpp"

namespace fineapprox {

namespace {

constexpr double kRCap = 1.0 - 1e-9;
constexpr double kRFloor = 1e-12;

double dual_norm(RefNorm kind, ConstSpan g) {
  if (kind == RefNorm::euclidean) return euclidean_norm(g);
  double s = 0.0;
  for (double v : g) s += std::abs(v);
  return s;
}

std::string point_string(ConstSpan x) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << format_double17(x[i]);
  os << ")";
  return os.str();
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(name) + " must be positive and finite");
  }
}

}  // namespace

ConstantMode constant_mode_from_string(std::string_view name) {
  if (name == "practical") return ConstantMode::practical;
  if (name == "paper") return ConstantMode::paper;
  throw ConfigError("unknown constants mode: " + std::string(name));
}

std::string_view to_string(ConstantMode mode) {
  return mode == ConstantMode::paper ? "paper" : "practical";
}

nlohmann::json ConstantsLedger::to_json() const {
  return {{"mode", to_string(mode)},
          {"eps", eps},
          {"eps_prime", eps_prime},
          {"eps1", eps1},
          {"r", r},
          {"rho", rho},
          {"rho_eff", rho_eff},
          {"L", lip_f},
          {"M2", m2},
          {"L_Q", lip_q},
          {"L_phi", l_phi},
          {"L1", l1},
          {"C0", c0},
          {"A1", a1},
          {"lip_nubar", lip_nubar},
          {"smooth_sup_m", smooth_sup_m},
          {"centers", centers},
          {"budget_active", budget_active},
          {"eps_prime_bounds",
           {{"one_eighth", eps_prime_bound_eighth},
            {"chain", eps_prime_bound_chain},
            {"radius", eps_prime_bound_radius}}},
          {"eps1_branches", {{"c0", eps1_branch_c0}, {"twenty_five", eps1_branch_25}}}};
}

ConstantsLedger ConstantsLedger::from_json(const nlohmann::json& doc) {
  ConstantsLedger c;
  c.mode = constant_mode_from_string(doc.at("mode").get<std::string>());
  c.eps = doc.at("eps").get<double>();
  c.eps_prime = doc.at("eps_prime").get<double>();
  c.eps1 = doc.at("eps1").get<double>();
  c.r = doc.at("r").get<double>();
  c.rho = doc.at("rho").is_null() ? std::numeric_limits<double>::infinity()
                                  : doc.at("rho").get<double>();
  c.rho_eff = doc.at("rho_eff").get<double>();
  c.lip_f = doc.at("L").get<double>();
  c.m2 = doc.at("M2").get<double>();
  c.lip_q = doc.at("L_Q").get<double>();
  c.l_phi = doc.at("L_phi").get<double>();
  c.l1 = doc.at("L1").get<double>();
  c.c0 = doc.at("C0").get<double>();
  c.a1 = doc.at("A1").get<double>();
  c.lip_nubar = doc.at("lip_nubar").get<double>();
  c.smooth_sup_m = doc.at("smooth_sup_m").get<int>();
  c.centers = doc.at("centers").get<std::size_t>();
  c.budget_active = doc.at("budget_active").get<bool>();
  const auto& b = doc.at("eps_prime_bounds");
  c.eps_prime_bound_eighth = b.at("one_eighth").get<double>();
  c.eps_prime_bound_chain = b.at("chain").get<double>();
  c.eps_prime_bound_radius = b.at("radius").get<double>();
  c.eps1_branch_c0 = doc.at("eps1_branches").at("c0").get<double>();
  c.eps1_branch_25 = doc.at("eps1_branches").at("twenty_five").get<double>();
  return c;
}

ConstantsLedger compute_constants(ConstantMode mode, double eps, double lip_f, double lip_q,
                                  double l1, double c0, double a1, double r, double lip_nubar) {
  ConstantsLedger c;
  c.mode = mode;
  c.eps = eps;
  c.lip_f = lip_f;
  c.lip_q = lip_q;
  c.l1 = l1;
  c.c0 = c0;
  c.a1 = a1;
  c.r = r;
  c.lip_nubar = lip_nubar;
  if (mode == ConstantMode::practical) {
    require_positive(eps, "epsilon");
    c.eps_prime = eps / 10.0;
    c.eps1 = c.eps_prime / 10.0;
    return c;
  }
  require_positive(lip_f, "L");
  require_positive(lip_q, "Lip(Q)");
  require_positive(l1, "L1");
  require_positive(r, "r");
  require_positive(lip_nubar, "Lip(nubar)");
  if (!(c0 >= 1.0)) throw ConfigError("C0 must be at least 1");
  if (!(a1 > 1.0)) throw ConfigError("A1 must exceed 1");
  c.eps_prime_bound_eighth = 1.0 / 8.0;
  c.eps_prime_bound_chain = 1.0 / (132.0 * c0 * a1 * a1 * l1 * lip_q);
  c.eps_prime_bound_radius = 1.0 / (10.0 * a1 * r);
  c.eps_prime = 0.99 * std::min({c.eps_prime_bound_eighth, c.eps_prime_bound_chain,
                                 c.eps_prime_bound_radius});
  c.eps1_branch_c0 = c.eps_prime * r / (3.0 * c0 * lip_f * lip_nubar);
  c.eps1_branch_25 = c.eps_prime * r / (25.0 * lip_f * lip_nubar);
  c.eps1 = std::min(c.eps1_branch_c0, c.eps1_branch_25);
  return c;
}

Normalization make_normalization(double f_min, double f_max) {
  if (!std::isfinite(f_min) || !std::isfinite(f_max) || f_min > f_max) {
    throw ConfigError("function range must be finite with f_min <= f_max");
  }
  return {f_min, f_max};
}

Target normalize_target(const Target& f, const Normalization& nz) {
  if (nz.degenerate()) throw ContractViolation("cannot normalize a constant range");
  Target t;
  t.dim = f.dim;
  const double a = nz.scale();
  const double lo = nz.f_min;
  auto inner = f.value_grad;
  t.value_grad = [inner, a, lo](ConstSpan x, MutSpan g) {
    const double v = inner(x, g);
    for (double& gi : g) gi *= a;
    return 1.0 + (v - lo) * a;
  };
  return t;
}

nlohmann::json BuildConfig::to_json() const {
  nlohmann::json b = nlohmann::json::array();
  for (const auto& iv : box) b.push_back({iv.lo, iv.hi});
  return {{"function", function},
          {"dim", dim},
          {"box", b},
          {"epsilon", eps},
          {"mode", to_string(mode)},
          {"form", to_string(form)},
          {"half_degree", half_degree},
          {"ordering", to_string(ordering)},
          {"max_centers", max_centers},
          {"a1_target", a1_target},
          {"C0", c0},
          {"qmc_key", qmc_key},
          {"delta_key", delta_key},
          {"spot_probes", spot_probes},
          {"rho_override", rho_override}};
}

BuildConfig BuildConfig::from_json(const nlohmann::json& doc) {
  BuildConfig c;
  c.function = doc.value("function", c.function);
  c.dim = doc.value("dim", c.dim);
  if (doc.contains("box")) {
    c.box.clear();
    for (const auto& iv : doc.at("box")) c.box.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
  }
  c.eps = doc.value("epsilon", c.eps);
  if (doc.contains("mode")) c.mode = constant_mode_from_string(doc.at("mode").get<std::string>());
  if (doc.contains("form")) c.form = form_kind_from_string(doc.at("form").get<std::string>());
  c.half_degree = doc.value("half_degree", c.half_degree);
  if (doc.contains("ordering")) {
    c.ordering = ordering_from_string(doc.at("ordering").get<std::string>());
  }
  c.max_centers = doc.value("max_centers", c.max_centers);
  c.a1_target = doc.value("a1_target", c.a1_target);
  c.c0 = doc.value("C0", c.c0);
  c.qmc_key = doc.value("qmc_key", c.qmc_key);
  c.delta_key = doc.value("delta_key", c.delta_key);
  c.spot_probes = doc.value("spot_probes", c.spot_probes);
  c.rho_override = doc.value("rho_override", c.rho_override);
  return c;
}

double Approximant::floor_tolerance() const {
  double q = 0.0;
  if (phi_) {
    for (std::size_t k = 0; k < phi_->size(); ++k) q = std::max(q, phi_->member(k).qmc_error);
  }
  return 1e-12 + 10.0 * q;
}

Approximant Approximant::build(const BuildConfig& config) {
  Approximant a;
  a.config_ = config;
  a.finish(nullptr);
  return a;
}

Approximant Approximant::from_json(const nlohmann::json& doc) {
  if (doc.value("schema", std::string()) != "fineapprox/1") {
    throw ConfigError("approximant document has an unknown schema");
  }
  Approximant a;
  a.config_ = BuildConfig::from_json(doc.at("config"));
  a.finish(&doc);
  return a;
}

void Approximant::finish(const nlohmann::json* saved) {
  const BuildConfig& cfg = config_;
  if (cfg.dim < 1) throw ConfigError("dimension must be positive");
  if (static_cast<int>(cfg.box.size()) != cfg.dim) {
    throw ConfigError("box must have one interval per dimension");
  }
  for (const auto& iv : cfg.box) {
    if (!(iv.lo <= iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) {
      throw ConfigError("box intervals must be finite with lo <= hi");
    }
  }
  require_positive(cfg.eps, "epsilon");
  function_ = &corpus_lookup(cfg.function);
  target_ = function_->target(cfg.dim);
  norm_ = make_normalization(function_->f_min, function_->f_max);

  ledger_ = ConstantsLedger{};
  ledger_.mode = cfg.mode;
  ledger_.eps = cfg.eps;
  ledger_.c0 = cfg.c0;
  if (norm_.degenerate()) {
    // Constant f: g is the constant itself.
    ledger_.eps_prime = cfg.eps / 10.0;
    ledger_.eps1 = ledger_.eps_prime / 10.0;
    return;
  }
  normalized_ = normalize_target(target_, norm_);

  const double scale = norm_.scale();
  const double eps_n = cfg.eps * scale;
  const double lip_raw = function_->lip * scale;
  const double m2 = function_->m2 * scale;
  const double lip_eff = std::max(lip_raw, 1.0);
  QFunc qf(SeparatingForm::make(cfg.form, cfg.dim, cfg.half_degree));
  const double lip_q = qf.padded_lipschitz();

  ConstantsLedger led;
  if (saved) {
    led = ConstantsLedger::from_json(saved->at("ledger"));
  } else if (cfg.mode == ConstantMode::practical) {
    led = compute_constants(ConstantMode::practical, eps_n, lip_eff, lip_q, 0.0, cfg.c0,
                            cfg.a1_target, 0.0, 0.0);
    led.m2 = m2;
    led.rho = cfg.rho_override > 0.0 ? cfg.rho_override
              : m2 > 0.0             ? led.eps_prime / m2
                                     : std::numeric_limits<double>::infinity();
    // A rho below the choose_r floor still leaves the center budget to decide r.
    double r = kRFloor;
    try {
      r = choose_r(qf, led.rho, kRCap);
    } catch (const InfeasibleError&) {
    }
    auto fits = [&](double rr) {
      try {
        return lattice_count(qf, cfg.box, rr) <= cfg.max_centers;
      } catch (const InfeasibleError&) {
        return false;
      }
    };
    if (!fits(r)) {
      double lo = r, hi = r;
      while (!fits(hi) && hi < kRCap) hi = std::min(2.0 * hi, kRCap);
      if (!fits(hi)) {
        throw InfeasibleError("box cannot be covered within the center budget");
      }
      for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-12; ++it) {
        const double mid = std::sqrt(lo * hi);
        (fits(mid) ? hi : lo) = mid;
      }
      r = hi;
      led.budget_active = true;
    }
    led.r = r;
  } else {
    // Paper mode: eps' depends on r through 1/(10 A1 r) and r on eps' through
    // rho = eps'/M2, so iterate to a fixed point.
    const double a1 = cfg.a1_target;
    double eps1 = 0.0;
    double r = 0.5;
    for (int it = 0; it < 50; ++it) {
      const double l1 = 15.0 / 8.0 * mu_lipschitz(eps1) * a1;
      led = compute_constants(ConstantMode::paper, eps_n, lip_eff, lip_q, l1, cfg.c0, a1, r,
                              nubar_lipschitz(r));
      // The printed bound omits the dependence on eps; the closing estimates
      // need 10 A1 eps' r < eps and 132 C0 A1^2 L1 Lip(Q) eps' < eps as well.
      led.eps_prime = std::min({led.eps_prime, 0.99 * eps_n * led.eps_prime_bound_chain,
                                0.99 * eps_n * led.eps_prime_bound_radius});
      led.eps1_branch_c0 = led.eps_prime * r / (3.0 * cfg.c0 * lip_eff * nubar_lipschitz(r));
      led.eps1_branch_25 = led.eps_prime * r / (25.0 * lip_eff * nubar_lipschitz(r));
      led.eps1 = std::min(led.eps1_branch_c0, led.eps1_branch_25);
      led.m2 = m2;
      led.rho = cfg.rho_override > 0.0 ? cfg.rho_override
                : m2 > 0.0             ? led.eps_prime / m2
                                       : std::numeric_limits<double>::infinity();
      const double r_new = choose_r(qf, led.rho, kRCap);
      const bool settled = std::abs(r_new - r) <= 1e-14 * r && std::abs(led.eps1 - eps1) <= 1e-14 * eps1;
      r = r_new;
      eps1 = led.eps1;
      if (settled) break;
    }
    led.r = r;
    double width = 0.0;
    for (const auto& iv : cfg.box) width = std::max(width, iv.width());
    if (width > 20.0 * r) {
      std::ostringstream msg;
      msg << "paper mode needs box width <= 20 r = " << 20.0 * r << ", got " << width;
      throw ConfigError(msg.str());
    }
  }
  led.mode = cfg.mode;
  led.eps = eps_n;
  led.c0 = cfg.c0;
  led.lip_f = lip_eff;
  led.m2 = m2;
  led.lip_q = lip_q;
  led.lip_nubar = nubar_lipschitz(led.r);

  Covering cov = saved ? covering_from_json(saved->at("covering"))
                       : build_covering(qf, cfg.box, led.r, cfg.ordering);
  led.rho_eff = cov.qfunc.enclosing_radius(5.0 * led.r);
  led.centers = cov.size();

  PhiOptions popt;
  popt.eps1 = led.eps1;
  popt.a1_target = cfg.a1_target;
  popt.qmc_key = cfg.qmc_key;
  popt.spot_probes = cfg.spot_probes;
  auto fam = saved ? std::make_shared<PhiFamily>(PhiFamily::from_json(cov, saved->at("phi")))
                   : std::make_shared<PhiFamily>(cov, popt);
  led.l1 = fam->l1();
  led.l_phi = fam->lipschitz();
  led.a1 = fam->bump_a1();
  led.smooth_sup_m = fam->bump_degree();

  PatchOptions opt;
  opt.eps_prime = led.eps_prime;
  opt.lip_f = lip_raw;
  opt.m2 = m2;
  opt.phi_lipschitz = led.l_phi;
  opt.delta_key = cfg.delta_key;
  const double r = led.r;
  const double env_scale = led.eps_prime * r / (2.0 * lip_eff * led.l_phi);
  // Practical mode: the strict envelope level makes nu' need kappa beyond 2^60 at
  // realistic r, so nu is tuned to eps1 instead; the strict envelope is still
  // checked outside the 6r bodies.
  const double level = cfg.mode == ConstantMode::practical ? led.eps1 : env_scale;
  const QFunc qcopy = cov.qfunc;
  opt.nu_tolerance = [qcopy, level](double t) { return level / (1.0 + qcopy.delta(t)); };
  if (saved) {
    const auto& pj = saved->at("patches");
    opt.saved_kappa = {pj.at("kappa").get<double>(), pj.at("nu_worst_value_err").get<double>(),
                       pj.at("nu_worst_deriv_err").get<double>(), pj.at("nu_worst_t").get<double>(),
                       pj.at("kappa_doublings").get<int>()};
  }

  covering_ = std::make_shared<const Covering>(std::move(cov));
  patches_ = std::make_shared<const PatchSet>(*covering_, normalized_, opt);
  phi_ = std::move(fam);
  ledger_ = led;
}

double Approximant::f_eval(ConstSpan x, MutSpan grad) const { return target_.value_grad(x, grad); }

PointEval Approximant::evaluate(ConstSpan x, bool diagnostics) const {
  if (is_constant()) throw ContractViolation("evaluate() is not defined for a constant target");
  const int d = dim();
  if (static_cast<int>(x.size()) != d) throw ContractViolation("point has the wrong dimension");
  const PhiFamily& fam = *phi_;
  const PatchSet& ps = *patches_;
  const Covering& cov = *covering_;
  const std::size_t n = fam.size();
  const RefNorm rn = cov.qfunc.form().reference_norm();

  PointEval pe;
  pe.phi.assign(n, 0.0);
  pe.phi_grad.assign(n * d, 0.0);
  pe.qdist.assign(n, 0.0);
  pe.psi.assign(n, 0.0);
  Vec qg(n * d);
  for (std::size_t j = 0; j < n; ++j) {
    pe.qdist[j] = cov.qfunc.distance_grad(x, cov.centers[j], MutSpan(qg).subspan(j * d, d));
  }
  if (diagnostics) {
    pe.f_grad.assign(d, 0.0);
    pe.f = normalized_.value_grad(x, pe.f_grad);
    pe.residual.assign(n, 0.0);
    pe.t_nu.assign(n, 0.0);
    pe.chain_lip.assign(n, -1.0);
  }
  Vec psi_grad(n * d, 0.0);
  Vec nug(d), dg(d);
  for (std::size_t k = 0; k < n; ++k) {
    const TaylorPatch& tp = ps.patch(k);
    if (fam.vanishes(k, pe.qdist)) {
      if (diagnostics) pe.t_nu[k] = std::abs(tp.eval(x) * ps.nu().eval(pe.qdist[k]));
      continue;
    }
    MutSpan pg = MutSpan(pe.phi_grad).subspan(k * d, d);
    const double ph = fam.phi_from_distances(k, pe.qdist, qg, pg);
    pe.phi[k] = ph;
    const double t = tp.eval(x);
    const double nu = ps.nu().eval(pe.qdist[k]);
    const double dnu = ps.nu().deriv(pe.qdist[k]);
    for (int i = 0; i < d; ++i) nug[i] = dnu * qg[k * d + i];
    const double delta = ps.delta_grad(k, x, dg);
    const double inner = t * nu - delta;
    pe.psi[k] = inner * ph;
    for (int i = 0; i < d; ++i) {
      const double dinner = tp.gradient[i] * nu + t * nug[i] - dg[i];
      psi_grad[k * d + i] = dinner * ph + inner * pg[i];
    }
    if (diagnostics) {
      pe.t_nu[k] = std::abs(t * nu);
      pe.residual[k] = std::abs((inner - pe.f) * ph);
      Vec cg(d);
      for (int i = 0; i < d; ++i) cg[i] = tp.gradient[i] * nu + t * nug[i] - pe.f_grad[i] - dg[i];
      pe.chain_lip[k] = dual_norm(rn, cg);
    }
  }

  const int m = ledger_.smooth_sup_m;
  Vec sg(n);
  pe.grad.assign(d, 0.0);
  const bool any_phi = std::any_of(pe.phi.begin(), pe.phi.end(), [](double v) { return v != 0.0; });
  const bool any_psi = std::any_of(pe.psi.begin(), pe.psi.end(), [](double v) { return v != 0.0; });
  if (!any_phi || !any_psi) {
    pe.g = std::numeric_limits<double>::quiet_NaN();
    return pe;
  }
  Vec dnum(d, 0.0), dden(d, 0.0);
  pe.numerator = smooth_sup_grad(pe.psi, m, sg);
  for (std::size_t k = 0; k < n; ++k) {
    if (sg[k] == 0.0) continue;
    for (int i = 0; i < d; ++i) dnum[i] += sg[k] * psi_grad[k * d + i];
  }
  pe.denominator = smooth_sup_grad(pe.phi, m, sg);
  for (std::size_t k = 0; k < n; ++k) {
    if (sg[k] == 0.0) continue;
    for (int i = 0; i < d; ++i) dden[i] += sg[k] * pe.phi_grad[k * d + i];
  }
  pe.g = pe.numerator / pe.denominator;
  for (int i = 0; i < d; ++i) {
    pe.grad[i] = (dnum[i] * pe.denominator - pe.numerator * dden[i]) /
                 (pe.denominator * pe.denominator);
  }
  return pe;
}

double Approximant::eval(ConstSpan x) const {
  Vec g(dim());
  return eval_grad(x, g);
}

double Approximant::eval_grad(ConstSpan x, MutSpan grad) const {
  if (is_constant()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return norm_.f_min;
  }
  const PointEval pe = evaluate(x, false);
  const double tol = floor_tolerance();
  if (!(pe.denominator >= 0.5 - tol)) {
    throw IntegrityError("denominator " + format_double17(pe.denominator) + " below 1/2 at x=" +
                         point_string(x));
  }
  if (!(pe.numerator >= 0.25 - tol)) {
    throw IntegrityError("numerator " + format_double17(pe.numerator) + " below 1/4 at x=" +
                         point_string(x));
  }
  const double span = norm_.f_max - norm_.f_min;
  for (int i = 0; i < dim(); ++i) grad[i] = pe.grad[i] * span;
  return norm_.inverse(pe.g);
}

double Approximant::psi_eval(std::size_t k, ConstSpan x) const {
  Vec g(dim());
  return psi_grad(k, x, g);
}

double Approximant::psi_grad(std::size_t k, ConstSpan x, MutSpan grad) const {
  if (is_constant()) throw ContractViolation("psi is not defined for a constant target");
  const int d = dim();
  std::fill(grad.begin(), grad.end(), 0.0);
  Vec pg(d);
  const double ph = phi_->phi_grad(k, x, pg);
  if (ph == 0.0 && std::all_of(pg.begin(), pg.end(), [](double v) { return v == 0.0; })) return 0.0;
  const PatchSet& ps = *patches_;
  const TaylorPatch& tp = ps.patch(k);
  Vec nug(d), dg(d);
  const double t = tp.eval(x);
  const double nu = ps.nu_grad(k, x, nug);
  const double delta = ps.delta_grad(k, x, dg);
  const double inner = t * nu - delta;
  for (int i = 0; i < d; ++i) {
    grad[i] = (tp.gradient[i] * nu + t * nug[i] - dg[i]) * ph + inner * pg[i];
  }
  return inner * ph;
}

Vec Approximant::tail_decay_diag(ConstSpan x) const {
  const PointEval pe = evaluate(x, false);
  Vec out(pe.psi.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(pe.psi[k]);
  return out;
}

nlohmann::json Approximant::to_json() const {
  nlohmann::json doc;
  doc["schema"] = "fineapprox/1";
  doc["config"] = config_.to_json();
  doc["normalization"] = {{"f_min", norm_.f_min}, {"f_max", norm_.f_max}};
  doc["constant"] = is_constant();
  doc["ledger"] = ledger_.to_json();
  if (!is_constant()) {
    doc["covering"] = fineapprox::to_json(*covering_);
    doc["phi"] = phi_->to_json();
    doc["patches"] = patches_->to_json();
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t k = 0; k < patches_->size(); ++k) {
      const auto& p = patches_->patch(k);
      pts.push_back({{"value", p.value}, {"gradient", p.gradient}});
    }
    doc["patches"]["taylor"] = pts;
  }
  return doc;
}

}  // namespace fineapprox
