#pragma once

// Constants ledger, normalization of f into [1, 2], and the approximant
// g = smoothsup(psi) / smoothsup(phi) with psi_k = (T_k nu_k - delta_k) phi_k.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fineapprox/corpus.hpp"
#include "fineapprox/patches.hpp"
#include "fineapprox/seppoly.hpp"
#include "fineapprox/supart.hpp"

namespace fineapprox {

enum class ConstantMode { practical, paper };
ConstantMode constant_mode_from_string(std::string_view name);
std::string_view to_string(ConstantMode mode);

struct ConstantsLedger {
  ConstantMode mode = ConstantMode::practical;
  double eps = 0.0;
  double eps_prime = 0.0;
  double eps1 = 0.0;
  double r = 0.0;
  double rho = 0.0;
  /// enclosing_radius(5r) after any center-budget adjustment.
  double rho_eff = 0.0;
  double lip_f = 0.0;
  double m2 = 0.0;
  double lip_q = 1.0;
  double l_phi = 0.0;
  double l1 = 0.0;
  double c0 = 1.0;
  double a1 = 1.1;
  double lip_nubar = 0.0;
  int smooth_sup_m = 1;
  std::size_t centers = 0;
  bool budget_active = false;
  // Paper-mode candidates for eps' and eps1.
  double eps_prime_bound_eighth = 0.0;
  double eps_prime_bound_chain = 0.0;
  double eps_prime_bound_radius = 0.0;
  double eps1_branch_c0 = 0.0;
  double eps1_branch_25 = 0.0;

  nlohmann::json to_json() const;
  static ConstantsLedger from_json(const nlohmann::json& doc);
};

/// Paper mode: eps' = 0.99 min{1/8, 1/(132 C0 A1^2 L1 L_Q), 1/(10 A1 r)},
/// eps1 = min{eps' r / (3 C0 L lip_nubar), eps' r / (25 L lip_nubar)}.
/// Practical mode: eps' = eps/10, eps1 = eps'/10.
ConstantsLedger compute_constants(ConstantMode mode, double eps, double lip_f, double lip_q,
                                  double l1, double c0, double a1, double r, double lip_nubar);

/// t(v) = 1 + (v - f_min) / (f_max - f_min).
struct Normalization {
  double f_min = 1.0;
  double f_max = 2.0;

  bool degenerate() const { return !(f_max > f_min); }
  double scale() const { return 1.0 / (f_max - f_min); }
  double forward(double v) const { return 1.0 + (v - f_min) * scale(); }
  double inverse(double t) const { return f_min + (t - 1.0) * (f_max - f_min); }
};

Normalization make_normalization(double f_min, double f_max);
/// The normalized evaluator t(f) with gradient scaled by 1/(f_max - f_min).
Target normalize_target(const Target& f, const Normalization& nz);

struct BuildConfig {
  std::string function = "sin1d";
  int dim = 1;
  Box box{{-1.0, 1.0}};
  double eps = 0.25;
  ConstantMode mode = ConstantMode::practical;
  FormKind form = FormKind::euclidean_power;
  int half_degree = 1;
  CenterOrdering ordering = CenterOrdering::center_out;
  std::size_t max_centers = 32;
  double a1_target = 1.1;
  double c0 = 1.0;
  std::uint64_t qmc_key = 0x5eed0001ull;
  std::uint64_t delta_key = 0x5eed0002ull;
  std::size_t spot_probes = 1000;
  /// Overrides rho = eps'/M2 when positive.
  double rho_override = 0.0;

  nlohmann::json to_json() const;
  static BuildConfig from_json(const nlohmann::json& doc);
};

/// Everything computed at one point, in normalized units.
struct PointEval {
  double g = 0.0;
  Vec grad;
  double numerator = 0.0;
  double denominator = 0.0;
  Vec phi;       // N
  Vec phi_grad;  // N x d
  Vec qdist;     // N
  Vec psi;       // N
  // Diagnostics, filled when requested.
  Vec residual;   // |(T_k nu_k - f - delta_k) phi_k|
  Vec t_nu;       // |T_k nu_k|
  Vec chain_lip;  // |grad(T_k nu_k - f - delta_k)| where phi_k != 0, else -1
  double f = 0.0;
  Vec f_grad;
};

class Approximant {
 public:
  static Approximant build(const BuildConfig& config);
  static Approximant from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const BuildConfig& config() const { return config_; }
  const ConstantsLedger& ledger() const { return ledger_; }
  const Normalization& normalization() const { return norm_; }
  const CorpusFunction& function() const { return *function_; }
  int dim() const { return config_.dim; }
  bool is_constant() const { return norm_.degenerate(); }
  const Covering& covering() const { return *covering_; }
  const PhiFamily& phi() const { return *phi_; }
  const PatchSet& patches() const { return *patches_; }
  /// Floor slack: 10 x the largest QMC error estimate, plus rounding.
  double floor_tolerance() const;

  /// g and its gradient in original units. Floors are asserted.
  double eval(ConstSpan x) const;
  double eval_grad(ConstSpan x, MutSpan grad) const;

  /// Full evaluation in normalized units; floors are not asserted.
  PointEval evaluate(ConstSpan x, bool diagnostics) const;
  double psi_eval(std::size_t k, ConstSpan x) const;
  double psi_grad(std::size_t k, ConstSpan x, MutSpan grad) const;
  /// |psi_k(x)| for every k.
  Vec tail_decay_diag(ConstSpan x) const;

  /// Original-units target f.
  double f_eval(ConstSpan x, MutSpan grad) const;

 private:
  Approximant() = default;
  void finish(const nlohmann::json* saved);

  BuildConfig config_;
  ConstantsLedger ledger_;
  Normalization norm_;
  const CorpusFunction* function_ = nullptr;
  Target target_;       // original units
  Target normalized_;   // in [1, 2]
  std::shared_ptr<const Covering> covering_;
  std::shared_ptr<const PhiFamily> phi_;
  std::shared_ptr<const PatchSet> patches_;
};

}  // namespace fineapprox
