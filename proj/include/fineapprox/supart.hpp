#pragma once

// The sup-partition family phi_k(x) = h_k(Q(x - x_1), ..., Q(x - x_k)), where
// h_k is the Gaussian smoothing of the coupled bump
// b_k(y) = mu(smoothsup(b^n(y_1), ..., b^n(y_{k-1}), bhat(y_k))).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fineapprox/bumps1d.hpp"
#include "fineapprox/mollify.hpp"
#include "fineapprox/qmc.hpp"
#include "fineapprox/seppoly.hpp"

namespace fineapprox {

constexpr std::size_t kMaxFamilySize = 32;

struct PhiOptions {
  double eps1 = 0.01;
  double a1_target = 1.1;
  std::uint64_t qmc_key = 0x5eed0001ull;
  /// When positive, every k_j is forced to this value (no search).
  double k_override = 0.0;
  /// Total spot-check probes, spread over the family members.
  std::size_t spot_probes = 1000;
};

/// Per-member smoothing data. Indices are zero-based: member k uses the
/// first k+1 Q-distances.
struct PhiMember {
  double kernel_k = 0.0;
  std::size_t samples = 0;
  double mn_bound = 0.0;
  PiecewisePoly profile;  // b^n with this member's M bound
  GaussExpect expect;
  /// Certified |h_k - b_k| bound from select_k.
  double certified_error = 0.0;
  double spot_check_error = 0.0;
  /// A-posteriori QMC error estimate (full set vs half prefix) at the probes.
  double qmc_error = 0.0;
};

class PhiFamily {
 public:
  PhiFamily(Covering covering, const PhiOptions& options);
  /// Saved per-member parameters; rebuilding from these skips every search.
  struct MemberRecord {
    double kernel_k = 0.0;
    double certified_error = 0.0;
    double spot_check_error = 0.0;
    double qmc_error = 0.0;
  };
  PhiFamily(Covering covering, const PhiOptions& options, const std::vector<MemberRecord>& records);
  static PhiFamily from_json(Covering covering, const nlohmann::json& doc);

  std::size_t size() const { return members_.size(); }
  const Covering& covering() const { return covering_; }
  double eps1() const { return options_.eps1; }
  const PhiOptions& options() const { return options_; }
  int bump_degree() const { return m_b_; }
  double bump_a1() const { return a_b_; }
  /// L1 = (15/8) Lip(mu) A_b.
  double l1() const { return l1_; }
  /// L_phi = L1 * padded Lip(Q) / r.
  double lipschitz() const { return l_phi_; }
  double bn_lipschitz() const { return bn_lip_; }
  double bn_deriv_lipschitz(std::size_t k) const;
  const PhiMember& member(std::size_t k) const { return members_.at(k); }
  const PiecewisePoly& mu() const { return mu_; }
  const PiecewisePoly& bhat() const { return bhat_; }

  double bn_eval(std::size_t k, ConstSpan y) const;
  double bn_grad(std::size_t k, ConstSpan y, MutSpan grad) const;

  /// True when phi_k(x) is exactly zero for every sample (no integration needed).
  bool vanishes(std::size_t k, ConstSpan qdist) const;
  double phi_eval(std::size_t k, ConstSpan x) const;
  double phi_grad(std::size_t k, ConstSpan x, MutSpan grad) const;

  /// Q(x - x_j) for every center.
  Vec qdistances(ConstSpan x) const;
  /// phi_k and its gradient given precomputed Q-distances and their gradients
  /// (row-major size() x d).
  double phi_from_distances(std::size_t k, ConstSpan qdist, ConstSpan qgrads, MutSpan grad) const;

  /// Minimal k with Q(x - x_k) < 3r; throws DomainError if none and
  /// IntegrityError if phi_k(x) <= 1/2.
  std::size_t witness_m(ConstSpan x) const;
  /// Smallest k with Q(x - x_k) < 3r, or size() if none.
  std::size_t witness_candidate(ConstSpan qdist) const;

  nlohmann::json to_json() const;

 private:
  void init_common();
  void build_member(std::size_t k, const MemberRecord& rec);
  double spot_check(std::size_t k, double kernel_k, double* qmc_err) const;
  template <bool WithGrad>
  double bump(std::size_t k, const double* y, double* grad) const;

  Covering covering_;
  PhiOptions options_;
  PiecewisePoly mu_;
  PiecewisePoly bhat_;
  int m_b_ = 1;
  double a_b_ = 1.0;
  double l1_ = 0.0;
  double l_phi_ = 0.0;
  double bn_lip_ = 0.0;
  std::shared_ptr<const NormalPointSet> points_;
  std::vector<PhiMember> members_;
};

struct PropertyResult {
  std::string name;
  bool pass = true;
  Vec worst_point;
  double worst_value = 0.0;
  double tolerance = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t flagged = 0;
};

struct PropertyReport {
  std::vector<PropertyResult> properties;
  std::vector<std::string> warnings;
  bool all_pass() const;
  nlohmann::json to_json() const;
};

/// Values and gradients of every phi_k at one point.
struct PhiSample {
  Vec x;
  Vec phi;      // size N
  Vec grad;     // N x d, row-major
  Vec qdist;    // size N
};

PhiSample sample_phi(const PhiFamily& fam, ConstSpan x);

/// Checks the five partition properties on a sample grid. Pairwise slopes
/// use consecutive grid points plus deterministic random pairs.
PropertyReport check_lemma_properties(const PhiFamily& fam, const std::vector<Vec>& grid);
PropertyReport check_lemma_properties(const PhiFamily& fam, const std::vector<PhiSample>& samples);

}  // namespace fineapprox
