#pragma once

// Local patch data per center: first-order Taylor polynomial T_n, the
// clipped McShane extension eps_n of (T_n - f) from D_n = D_Q(x_n, 5r), its
// Gaussian smoothing delta_n, and the cutoff nu_n = nu(Q(. - x_n)).

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <json.hpp>

#include "fineapprox/mollify.hpp"
#include "fineapprox/seppoly.hpp"

namespace fineapprox {

/// A C^1 function with analytic gradient.
struct Target {
  int dim = 1;
  /// Returns f(x) and writes f'(x) into grad.
  std::function<double(ConstSpan, MutSpan)> value_grad;

  double value(ConstSpan x) const {
    Vec g(dim);
    return value_grad(x, g);
  }
};

struct TaylorPatch {
  Vec center;
  double value = 0.0;
  Vec gradient;

  double eval(ConstSpan x) const;
};

/// inf over samples of h(y) + lip |x - y|, clipped to [-bound, bound].
double mcshane_extend(const std::vector<Vec>& points, const Vec& values, double lip, double bound,
                      ConstSpan x, RefNorm norm = RefNorm::euclidean);

struct PatchOptions {
  /// Lipschitz target eps' for eps_n (and the smoothing budget eps' r / L_phi).
  double eps_prime = 0.01;
  double lip_f = 1.0;
  double m2 = 0.0;
  double phi_lipschitz = 1.0;
  /// Tolerance for |nu - nubar| and |nu' - nubar'| as a function of t.
  std::function<double(double)> nu_tolerance;
  std::uint64_t delta_key = 0x5eed0002ull;
  std::size_t delta_half_samples = 1u << 12;
  std::size_t nu_probe_count = 2000;
  /// A saved selection; when its kappa is positive the search is skipped.
  KappaSelection saved_kappa{};
};

class PatchSet {
 public:
  PatchSet(const Covering& covering, Target f, PatchOptions options);

  std::size_t size() const { return patches_.size(); }
  const TaylorPatch& patch(std::size_t n) const { return patches_.at(n); }
  const std::vector<Vec>& samples(std::size_t n) const { return samples_.at(n); }
  const Vec& sample_values(std::size_t n) const { return sample_values_.at(n); }

  /// Lipschitz constant used for every eps_n.
  double patch_lipschitz() const { return lip_; }
  /// Clip level |eps_n| <= bound.
  double bound() const { return bound_; }
  /// Radius of D_n in the reference norm (enclosing radius of level 5r).
  double body_radius() const { return body_radius_; }
  double delta_target() const { return delta_target_; }
  const GaussianSmoother& smoother() const { return smoother_; }
  const Conv1D& nu() const { return nu_; }
  const KappaSelection& kappa_selection() const { return kappa_sel_; }
  double nu_tolerance(double t) const { return options_.nu_tolerance(t); }
  const PatchOptions& options() const { return options_; }

  double taylor_eval(std::size_t n, ConstSpan x) const { return patches_[n].eval(x); }
  /// T_n(x) - f(x).
  double h_eval(std::size_t n, ConstSpan x) const;

  double epsilon_eval(std::size_t n, ConstSpan x) const;
  double epsilon_grad(std::size_t n, ConstSpan x, MutSpan grad) const;
  double delta_eval(std::size_t n, ConstSpan x) const;
  double delta_grad(std::size_t n, ConstSpan x, MutSpan grad) const;
  double nu_eval(std::size_t n, ConstSpan x) const;
  double nu_grad(std::size_t n, ConstSpan x, MutSpan grad) const;

  /// Largest |T_n - f| over the sample set of patch n.
  double sampled_h_max(std::size_t n) const;

  nlohmann::json to_json() const;

 private:
  template <bool WithGrad>
  double eps_at(std::size_t n, ConstSpan x, double* grad) const;
  /// Boundary point of D_n in direction w from x_n.
  void boundary_point(std::size_t n, ConstSpan w, Vec& p) const;
  /// Local minimization of h(p) + lip |x - p| over the boundary of D_n,
  /// started from direction w. Returns the value and leaves the minimizer in p.
  double refine(std::size_t n, ConstSpan x, Vec w, Vec& p) const;

  Covering covering_;
  Target f_;
  PatchOptions options_;
  std::vector<TaylorPatch> patches_;
  std::vector<std::vector<Vec>> samples_;
  std::vector<Vec> sample_values_;
  double lip_ = 0.0;
  double bound_ = 0.0;
  double body_radius_ = 0.0;
  double body_q_level_ = 0.0;  // q value on the boundary of D_n
  double delta_target_ = 0.0;
  GaussianSmoother smoother_;
  Conv1D nu_;
  KappaSelection kappa_sel_;
};

}  // namespace fineapprox
