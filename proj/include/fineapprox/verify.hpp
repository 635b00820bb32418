#pragma once

// End-to-end verification: grid sup errors, finite-difference check of g',
// partition properties, floors, per-case diagnostics, cutoff envelopes and
// the JSON report / CSV dump.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fineapprox/assemble.hpp"

namespace fineapprox {

/// Worker count: FINEAPPROX_THREADS if set and positive, else hardware concurrency.
std::size_t worker_count();
/// Runs fn(i) for i in [0, n) on worker_count() threads. Results must be
/// written per index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Tensor grid with per_axis points on every axis of positive width (one
/// point on degenerate axes), endpoints included.
std::vector<Vec> make_grid(const Box& box, std::size_t per_axis);
std::size_t default_grid_per_axis(int d);

struct VerifyOptions {
  /// 0 selects default_grid_per_axis(d).
  std::size_t grid_per_axis = 0;
  std::size_t fd_points = 100;
  double fd_step = 1e-5;
  double fd_bound = 1e-4;
  std::size_t envelope_probes = 1000;
  double budget_seconds = 600.0;
  std::uint64_t seed = 0x7e57ull;
};

struct SampleRow {
  Vec x;
  double f = 0.0;
  double g = 0.0;
  double abs_err = 0.0;
  double grad_err = 0.0;
};

struct VerifyResult {
  nlohmann::json report;
  std::vector<SampleRow> rows;
  bool pass = false;
};

VerifyResult verify(const Approximant& appr, const VerifyOptions& options);

/// Report with runtime fields removed, for reproducibility comparisons.
nlohmann::json strip_timing(nlohmann::json report);

void write_csv(const std::string& path, const std::vector<SampleRow>& rows);
std::vector<SampleRow> read_csv(const std::string& path);

struct SweepRow {
  double eps = 0.0;
  double sup_abs_err = 0.0;
  double sup_grad_err = 0.0;
  std::size_t centers = 0;
  double runtime = 0.0;
  bool pass = false;
};

/// One build + verify per epsilon (nonempty, strictly decreasing).
std::vector<SweepRow> sweep(const BuildConfig& base, const std::vector<double>& eps_list,
                            const VerifyOptions& options);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

}  // namespace fineapprox
