#include "fineapprox/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "fineapprox/error.hpp"

namespace fineapprox {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double dual_norm(RefNorm kind, ConstSpan g) {
  if (kind == RefNorm::euclidean) return euclidean_norm(g);
  double s = 0.0;
  for (double v : g) s += std::abs(v);
  return s;
}

nlohmann::json bound_entry(double value, double bound, bool pass) {
  return {{"value", value}, {"bound", bound}, {"pass", pass}};
}

}  // namespace

std::size_t worker_count() {
  if (const char* env = std::getenv("FINEAPPROX_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t default_grid_per_axis(int d) { return d == 1 ? 2000 : d == 2 ? 200 : 20; }

std::vector<Vec> make_grid(const Box& box, std::size_t per_axis) {
  const std::size_t d = box.size();
  std::vector<std::size_t> counts(d);
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    counts[i] = box[i].width() > 0.0 ? per_axis : 1;
    total *= counts[i];
  }
  std::vector<Vec> grid;
  grid.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t p = 0; p < total; ++p) {
    Vec x(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = counts[i] == 1 ? box[i].lo
                            : box[i].lo + box[i].width() * static_cast<double>(idx[i]) /
                                              static_cast<double>(counts[i] - 1);
    }
    grid.push_back(std::move(x));
    for (std::size_t i = d; i-- > 0;) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return grid;
}

VerifyResult verify(const Approximant& appr, const VerifyOptions& options) {
  const auto t0 = Clock::now();
  const int d = appr.dim();
  const BuildConfig& cfg = appr.config();
  const std::size_t per_axis =
      options.grid_per_axis ? options.grid_per_axis : default_grid_per_axis(d);
  const std::vector<Vec> grid = make_grid(cfg.box, per_axis);
  if (grid.size() < 100) throw ContractViolation("verification grid needs at least 100 points");

  VerifyResult res;
  nlohmann::json& rep = res.report;
  rep["schema"] = "fineapprox-report/1";
  rep["config"] = cfg.to_json();
  rep["ledger"] = appr.ledger().to_json();
  rep["normalization"] = {{"f_min", appr.normalization().f_min},
                          {"f_max", appr.normalization().f_max}};
  rep["grid"] = {{"per_axis", per_axis}, {"points", grid.size()}};
  rep["gradient_norm"] = "euclidean";
  rep["qmc_keys"] = {{"phi", cfg.qmc_key}, {"delta", cfg.delta_key}};

  const std::size_t n_grid = grid.size();
  const bool constant = appr.is_constant();
  const std::size_t n = constant ? 0 : appr.phi().size();
  std::vector<PointEval> evals(constant ? 0 : n_grid);
  res.rows.resize(n_grid);
  bool partial = false;

  // Grid sweep; the budget guard stops workers once the wall clock runs out.
  std::vector<char> done(n_grid, 0);
  const double span = appr.normalization().f_max - appr.normalization().f_min;
  parallel_for(n_grid, [&](std::size_t i) {
    if (seconds_since(t0) > options.budget_seconds) return;
    const Vec& x = grid[i];
    SampleRow& row = res.rows[i];
    row.x = x;
    Vec fg(d);
    row.f = appr.f_eval(x, fg);
    Vec gg(d, 0.0);
    if (constant) {
      row.g = appr.normalization().f_min;
    } else {
      evals[i] = appr.evaluate(x, true);
      row.g = appr.normalization().inverse(evals[i].g);
      for (int j = 0; j < d; ++j) gg[j] = evals[i].grad[j] * span;
    }
    row.abs_err = std::abs(row.f - row.g);
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += (fg[j] - gg[j]) * (fg[j] - gg[j]);
    row.grad_err = std::sqrt(s);
    done[i] = 1;
  });
  std::size_t completed = 0;
  for (char c : done) completed += c;
  if (completed < n_grid) {
    partial = true;
    std::vector<SampleRow> kept;
    std::vector<PointEval> kept_evals;
    for (std::size_t i = 0; i < n_grid; ++i) {
      if (!done[i]) continue;
      kept.push_back(std::move(res.rows[i]));
      if (!constant) kept_evals.push_back(std::move(evals[i]));
    }
    res.rows = std::move(kept);
    evals = std::move(kept_evals);
  }

  double sup_abs = 0.0, sup_grad = 0.0;
  for (const auto& row : res.rows) {
    sup_abs = std::max(sup_abs, std::isnan(row.abs_err) ? kInf : row.abs_err);
    sup_grad = std::max(sup_grad, std::isnan(row.grad_err) ? kInf : row.grad_err);
  }
  const bool value_ok = sup_abs < cfg.eps;
  const bool grad_ok = sup_grad < cfg.eps;
  rep["metrics"] = {{"sup_abs_err", bound_entry(sup_abs, cfg.eps, value_ok)},
                    {"sup_grad_err", bound_entry(sup_grad, cfg.eps, grad_ok)},
                    {"units", "original"}};

  // Central finite differences of g at seeded random points.
  {
    std::mt19937_64 rng(options.seed);
    std::vector<Vec> pts(options.fd_points, Vec(d));
    for (auto& x : pts) {
      for (int j = 0; j < d; ++j) {
        const double lo = cfg.box[j].lo, hi = cfg.box[j].hi;
        const double pad = std::min(options.fd_step, 0.5 * (hi - lo));
        x[j] = std::uniform_real_distribution<double>(lo + pad, hi - pad)(rng);
      }
    }
    Vec rel(pts.size(), 0.0);
    std::string failure;
    try {
      parallel_for(pts.size(), [&](std::size_t i) {
        Vec an(d), fd(d), y = pts[i];
        appr.eval_grad(pts[i], an);
        for (int j = 0; j < d; ++j) {
          y[j] = pts[i][j] + options.fd_step;
          const double up = appr.eval(y);
          y[j] = pts[i][j] - options.fd_step;
          const double dn = appr.eval(y);
          y[j] = pts[i][j];
          fd[j] = (up - dn) / (2.0 * options.fd_step);
        }
        Vec diff(d);
        for (int j = 0; j < d; ++j) diff[j] = an[j] - fd[j];
        rel[i] = euclidean_norm(diff) /
                 std::max({euclidean_norm(an), euclidean_norm(fd), 1e-6});
      });
    } catch (const Error& e) {
      failure = e.what();
    }
    const double worst = pts.empty() ? 0.0 : *std::max_element(rel.begin(), rel.end());
    rep["fd_check"] = {{"points", pts.size()},
                       {"step", options.fd_step},
                       {"max_rel_err", worst},
                       {"bound", options.fd_bound},
                       {"pass", failure.empty() && worst <= options.fd_bound}};
    if (!failure.empty()) rep["fd_check"]["error"] = failure;
  }

  bool structure_ok = true;
  if (constant) {
    rep["lemma"] = {{"skipped", "constant target"}};
    rep["floors"] = {{"skipped", "constant target"}};
    rep["diagnostics"] = {{"skipped", "constant target"}};
    rep["envelopes"] = {{"skipped", "constant target"}};
    rep["tail"] = {{"skipped", "constant target"}};
  } else {
    const ConstantsLedger& led = appr.ledger();
    const Covering& cov = appr.covering();
    const PhiFamily& fam = appr.phi();
    const PatchSet& ps = appr.patches();
    const double r = led.r;
    const double L = led.lip_f;
    const double eps_p = led.eps_prime;

    // Partition properties on the same grid.
    std::vector<PhiSample> samples;
    samples.reserve(evals.size());
    for (std::size_t i = 0; i < evals.size(); ++i) {
      samples.push_back({res.rows[i].x, evals[i].phi, evals[i].phi_grad, evals[i].qdist});
    }
    const PropertyReport lemma = check_lemma_properties(fam, samples);
    rep["lemma"] = lemma.to_json();
    samples.clear();

    // Numerator and denominator floors.
    double min_num = kInf, min_den = kInf;
    std::size_t bad_num = 0, bad_den = 0;
    for (const auto& pe : evals) {
      const double num = std::isnan(pe.g) ? 0.0 : pe.numerator;
      const double den = std::isnan(pe.g) ? 0.0 : pe.denominator;
      min_num = std::min(min_num, num);
      min_den = std::min(min_den, den);
      if (!(num >= 0.25)) ++bad_num;
      if (!(den >= 0.5)) ++bad_den;
    }
    const bool floors_ok = bad_num == 0 && bad_den == 0;
    rep["floors"] = {{"numerator_min", min_num},
                     {"denominator_min", min_den},
                     {"numerator_floor", 0.25},
                     {"denominator_floor", 0.5},
                     {"numerator_violations", bad_num},
                     {"denominator_violations", bad_den},
                     {"assertion_tolerance", appr.floor_tolerance()},
                     {"pass", floors_ok}};

    // Per-case bounds in normalized units against the strict-mode forms.
    double case1 = 0.0, case2 = 0.0, tnu = 0.0, chain = 0.0, far_sum = 0.0;
    double witness_min = kInf;
    std::size_t case1_n = 0, case2_n = 0;
    double val_err_norm = 0.0, grad_err_norm = 0.0;
    for (const auto& pe : evals) {
      double fs = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (pe.qdist[k] < 5.0 * r) {
          case1 = std::max(case1, pe.residual[k]);
          ++case1_n;
        } else {
          case2 = std::max(case2, pe.residual[k]);
          ++case2_n;
          fs += std::abs(pe.psi[k]);
        }
        tnu = std::max(tnu, pe.t_nu[k]);
        chain = std::max(chain, pe.chain_lip[k]);
      }
      far_sum = std::max(far_sum, fs);
      const std::size_t m = fam.witness_candidate(pe.qdist);
      witness_min = std::min(witness_min, m < n ? pe.psi[m] : -kInf);
      val_err_norm = std::max(val_err_norm, std::abs(pe.g - pe.f));
      Vec diff(d);
      for (int j = 0; j < d; ++j) diff[j] = pe.grad[j] - pe.f_grad[j];
      grad_err_norm = std::max(grad_err_norm, euclidean_norm(diff));
    }
    const double b_case1 = 6.0 * r * eps_p / led.l_phi;
    const double b_case2 = eps_p * r;
    const double b_tnu = 18.0 * L;
    const double b_chain = 13.0 * led.c0 * L * led.lip_q * led.lip_nubar;
    const double b_final_val = 10.0 * led.a1 * eps_p * r;
    const double b_final_grad = 132.0 * led.c0 * led.a1 * led.a1 * led.l1 * led.lip_q * eps_p;
    rep["diagnostics"] = {
        {"units", "normalized"},
        {"case1_inside_body", {{"value", case1}, {"bound", b_case1}, {"pass", case1 <= b_case1},
                               {"checked", case1_n}}},
        {"case2_outside_body", {{"value", case2}, {"bound", b_case2}, {"pass", case2 <= b_case2},
                                {"checked", case2_n}}},
        {"taylor_cutoff", bound_entry(tnu, b_tnu, tnu <= b_tnu)},
        {"lipschitz_chain", bound_entry(chain, b_chain, chain <= b_chain)},
        {"value_error_total",
         {{"value", val_err_norm},
          {"per_case_bound", 2.0 * std::max(case1, case2)},
          {"bound", b_final_val},
          {"pass", val_err_norm <= b_final_val}}},
        {"gradient_error_total", bound_entry(grad_err_norm, b_final_grad,
                                             grad_err_norm <= b_final_grad)}};

    const double b_tail = static_cast<double>(n) * (18.0 * L + 3.0) * led.eps1;
    rep["tail"] = {{"max_far_sum", far_sum},
                   {"far_sum_bound", b_tail},
                   {"witness_psi_min", witness_min},
                   {"witness_floor", 0.25},
                   {"pass", far_sum <= b_tail && witness_min > 0.25}};

    // Cutoff envelopes outside the 6r bodies, per patch.
    const double env_scale = eps_p * r / (2.0 * L * led.l_phi);
    const QFunc& qf = cov.qfunc;
    const int n2 = 2 * qf.form().half_degree();
    Vec worst_val(n, 0.0), worst_grad(n, 0.0);
    parallel_for(n, [&](std::size_t k) {
      std::mt19937_64 rng(options.seed ^ (0x9e3779b97f4a7c15ull * (k + 1)));
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> level(6.0 * r, 30.0 * r);
      Vec v(d), x(d), g(d);
      for (std::size_t p = 0; p < options.envelope_probes; ++p) {
        for (auto& vi : v) vi = normal(rng);
        const double t = level(rng);
        const double qv = qf.form().q(v);
        const double s = std::pow((std::pow(1.0 + t, n2) - 1.0) / qv, 1.0 / n2);
        for (int j = 0; j < d; ++j) x[j] = cov.centers[k][j] + s * v[j];
        const double tq = qf.distance(x, cov.centers[k]);
        const double env = env_scale / (1.0 + qf.delta(tq));
        const double nv = ps.nu_grad(k, x, g);
        worst_val[k] = std::max(worst_val[k], std::abs(nv) / env);
        worst_grad[k] = std::max(worst_grad[k], dual_norm(qf.form().reference_norm(), g) /
                                                    qf.padded_lipschitz() / env);
      }
    });
    const double wv = n ? *std::max_element(worst_val.begin(), worst_val.end()) : 0.0;
    const double wg = n ? *std::max_element(worst_grad.begin(), worst_grad.end()) : 0.0;
    rep["envelopes"] = {{"probes_per_patch", options.envelope_probes},
                        {"value_ratio_max", wv},
                        {"gradient_ratio_max", wg},
                        {"envelope_scale", env_scale},
                        {"pass", wv <= 1.0 && wg <= 1.0}};

    rep["nu"] = {{"kappa", ps.kappa_selection().kappa},
                 {"doublings", ps.kappa_selection().doublings},
                 {"worst_value_err", ps.kappa_selection().worst_value_err},
                 {"worst_deriv_err", ps.kappa_selection().worst_deriv_err}};
    structure_ok = lemma.all_pass() && floors_ok;
  }

  res.pass = value_ok && grad_ok && !partial;
  rep["pass"] = res.pass;
  rep["structure_pass"] = structure_ok;
  rep["partial"] = partial;
  rep["budget"] = {{"seconds", options.budget_seconds}, {"completed_points", res.rows.size()}};
  rep["runtime"] = {{"verify_seconds", seconds_since(t0)}, {"threads", worker_count()}};
  return res;
}

nlohmann::json strip_timing(nlohmann::json report) {
  report.erase("runtime");
  return report;
}

void write_csv(const std::string& path, const std::vector<SampleRow>& rows) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw ConfigError("cannot open " + path + " for writing");
  const std::size_t d = rows.empty() ? 1 : rows.front().x.size();
  for (std::size_t i = 0; i < d; ++i) std::fprintf(fp, "x%zu,", i);
  std::fprintf(fp, "f,g,abs_err,grad_err\n");
  for (const auto& r : rows) {
    for (double v : r.x) std::fprintf(fp, "%.17g,", v);
    std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g\n", r.f, r.g, r.abs_err, r.grad_err);
  }
  std::fclose(fp);
}

std::vector<SampleRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
  if (cols < 5) throw ConfigError("malformed sample CSV header");
  const std::size_t d = cols - 4;
  std::vector<SampleRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != cols) throw ConfigError("malformed sample CSV row");
    SampleRow r;
    r.x.assign(vals.begin(), vals.begin() + d);
    r.f = vals[d];
    r.g = vals[d + 1];
    r.abs_err = vals[d + 2];
    r.grad_err = vals[d + 3];
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> sweep(const BuildConfig& base, const std::vector<double>& eps_list,
                            const VerifyOptions& options) {
  if (eps_list.empty()) throw ContractViolation("sweep needs at least one epsilon");
  for (std::size_t i = 1; i < eps_list.size(); ++i) {
    if (!(eps_list[i] < eps_list[i - 1])) {
      throw ContractViolation("sweep epsilons must be strictly decreasing");
    }
  }
  std::vector<SweepRow> rows;
  for (double eps : eps_list) {
    const auto t0 = Clock::now();
    BuildConfig cfg = base;
    cfg.eps = eps;
    const Approximant appr = Approximant::build(cfg);
    const VerifyResult vr = verify(appr, options);
    SweepRow row;
    row.eps = eps;
    row.sup_abs_err = vr.report["metrics"]["sup_abs_err"]["value"].get<double>();
    row.sup_grad_err = vr.report["metrics"]["sup_grad_err"]["value"].get<double>();
    row.centers = appr.is_constant() ? 0 : appr.covering().size();
    row.pass = vr.pass;
    row.runtime = seconds_since(t0);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw ConfigError("cannot open " + path + " for writing");
  std::fprintf(fp, "epsilon,sup_abs_err,sup_grad_err,centers,runtime\n");
  for (const auto& r : rows) {
    std::fprintf(fp, "%.17g,%.17g,%.17g,%zu,%.3f\n", r.eps, r.sup_abs_err, r.sup_grad_err,
                 r.centers, r.runtime);
  }
  std::fclose(fp);
}

}  // namespace fineapprox
