#pragma once

// Separating polynomials q, the analytic proxy norm Q = (q+1)^{1/2n} - 1,
// Q-bodies and lattice coverings of a compact box by Q-bodies.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fineapprox/types.hpp"

namespace fineapprox {

enum class FormKind { euclidean_power, even_power_sum };
enum class RefNorm { euclidean, sup };

FormKind form_kind_from_string(std::string_view name);
std::string_view to_string(FormKind kind);

/// A 2n-homogeneous polynomial q with ||x||^{2n} <= q(x) <= A ||x||^{2n}
/// in the form's reference norm.
class SeparatingForm {
 public:
  /// euclidean_power: q = (sum x_i^2)^n, A = 1, euclidean norm.
  /// even_power_sum:  q = sum x_i^{2n}, A = d, sup norm.
  static SeparatingForm make(FormKind kind, int dim, int half_degree);

  FormKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int half_degree() const { return n_; }
  double equivalence_constant() const { return a_; }
  RefNorm reference_norm() const {
    return kind_ == FormKind::euclidean_power ? RefNorm::euclidean : RefNorm::sup;
  }

  double q(ConstSpan x) const;
  void q_grad(ConstSpan x, MutSpan out) const;
  Vec q_grad(ConstSpan x) const;

  /// Norm of x in the reference norm.
  double norm(ConstSpan x) const;

 private:
  SeparatingForm(FormKind kind, int dim, int n, double a)
      : kind_(kind), dim_(dim), n_(n), a_(a) {}
  void check_dim(ConstSpan x) const;

  FormKind kind_;
  int dim_;
  int n_;
  double a_;
};

class QFunc {
 public:
  explicit QFunc(SeparatingForm form);

  const SeparatingForm& form() const { return form_; }
  int dim() const { return form_.dim(); }

  double value(ConstSpan x) const;
  /// Writes the gradient into grad and returns Q(x).
  double value_grad(ConstSpan x, MutSpan grad) const;
  Vec grad(ConstSpan x) const;

  /// Q(y - center), with the gradient taken with respect to y.
  double distance(ConstSpan y, ConstSpan center) const;
  double distance_grad(ConstSpan y, ConstSpan center, MutSpan grad) const;

  /// Certified upper bound on sup ||grad Q|| in the dual of the reference norm.
  double lipschitz_bound() const { return lip_; }
  /// max(lipschitz_bound, 1 + 1e-6); used wherever a constant needs Lip(Q) > 1.
  double padded_lipschitz() const { return padded_lip_; }

  /// Delta(t) = ((|t|+1)^{2n} - 1)^{1/2n}.
  double delta(double t) const;
  /// Q(x) < t implies ||x|| < enclosing_radius(t).
  double enclosing_radius(double t) const;
  /// Largest s with {||x|| < s} contained in {Q(x) < t}.
  double inscribed_radius(double t) const;
  /// Inverse of inscribed_radius: smallest t with {||x|| < s} inside {Q < t}.
  double body_level_for_inscribed(double s) const;

  /// Strict membership y in D_Q(center, rho).
  bool contains(ConstSpan center, double rho, ConstSpan y) const;

 private:
  SeparatingForm form_;
  double lip_;
  double padded_lip_;
};

/// Largest r <= min(r_cap, 1 - 1e-9) with enclosing_radius(5r) <= rho.
double choose_r(const QFunc& qf, double rho, double r_cap);

enum class CenterOrdering { center_out, lexicographic };
CenterOrdering ordering_from_string(std::string_view name);
std::string_view to_string(CenterOrdering ordering);

struct Covering {
  Box box;
  double r = 0.0;
  CenterOrdering ordering = CenterOrdering::center_out;
  std::vector<Vec> centers;
  QFunc qfunc;
  /// mn_bounds[k] bounds sup{Q(x - x_j) : x in D_Q(x_k, 4r), j <= k}.
  Vec mn_bounds;

  std::size_t size() const { return centers.size(); }
  int dim() const { return qfunc.dim(); }
};

/// Per-axis lattice spacing used for Q-bodies of level r.
double lattice_spacing(const QFunc& qf, double r);
/// Number of lattice centers build_covering would produce.
std::size_t lattice_count(const QFunc& qf, const Box& box, double r);

/// Lattice covering of the box by D_Q(x_k, r). The probe-grid coverage check
/// runs before returning; spacing_scale > 1 widens the lattice (test hook).
Covering build_covering(const QFunc& qf, const Box& box, double r, CenterOrdering ordering,
                        double spacing_scale = 1.0);

/// Certified bound max_{j<=k} Q(x_k - x_j) + Lip(Q) * enclosing_radius(4r).
/// k is zero-based.
double compute_mn_bound(const Covering& covering, std::size_t k);

nlohmann::json to_json(const Covering& covering);
Covering covering_from_json(const nlohmann::json& doc);

/// 17 significant digit decimal rendering used for serialized coordinates.
std::string format_double17(double v);

}  // namespace fineapprox
