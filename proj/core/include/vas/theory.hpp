// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/diversity.hpp"
#include "vas/policy.hpp"
#include "vas/rng.hpp"
#include "vas/vps.hpp"

namespace vas {

enum class CheckStatus { holds, violated, vacuous, premise_failed, skipped };
std::string_view to_string(CheckStatus status);

/// Single-rollout estimator G = g(y)(R - b) with b = exact E[R].
struct SandwichResult {
  CheckStatus status = CheckStatus::skipped;
  double reward_variance = 0.0;
  double gamma_eigen_min = 0.0;  // full parameter space; 0 up to rounding (softmax shift invariance)
  double gamma_eigen_max = 0.0;
  double gamma_eigen_min_identifiable = 0.0;  // restricted to per-position sum-zero directions
  std::vector<double> var_g_eigenvalues;      // ascending
  double lower_bound = 0.0;                   // gamma_eigen_min * Var[R]
  double upper_bound = 0.0;                   // 2T * Var[R]
  double max_lower_violation = 0.0;           // max(0, lower_bound - eig)
  double max_upper_violation = 0.0;           // max(0, eig - upper_bound)
  bool identifiable_lower_holds = true;       // diagnostic on the identifiable subspace (not asserted)
  double tolerance = 1e-9;
};

SandwichResult check_variance_sandwich(const PolicyParams& policy, const Prompt& prompt,
                                       double tolerance = 1e-9, std::uint64_t cap = 1'000'000);

/// Exact Var[g(y)(R - b)] for a single rollout, dim x dim row-major.
std::vector<double> exact_estimator_covariance(const PolicyParams& policy, const Prompt& prompt, double baseline,
                                               std::uint64_t cap = 1'000'000);

struct ProgressOptions {
  int draws = 10'000;
  int group_size = 8;
  int curvature_probes = 64;
  double probe_step = 1e-3;
  double smoothness_safety = 2.0;
  double z = 3.0;  // width of the Monte Carlo allowance in standard errors
  std::uint64_t cap = 1'000'000;
};

struct ProgressResult {
  CheckStatus status = CheckStatus::skipped;
  double reward_variance = 0.0;
  double grad_norm_sq = 0.0;
  double c_min = 0.0;           // |grad J|^2 / Var[R]
  double smoothness = 0.0;      // L-hat after the safety factor
  double eta = 0.0;             // c_min / (4 L-hat), used for the check
  double eta_conservative = 0.0;  // c_min / (2 L-hat (c_min + d * 2T)), logged
  double mean_gain = 0.0;
  double gain_standard_error = 0.0;
  double bound_rhs = 0.0;       // eta * c_min / 4 * Var[R]
  int draws = 0;
};

/// Max over random unit directions of |second difference of J| (no safety factor).
double estimate_smoothness(const PolicyParams& policy, const Prompt& prompt, int probes, double step, Rng& rng,
                           std::uint64_t cap = 1'000'000);

/// J(theta + eta * grad J) - J(theta) with the exact gradient.
double exact_ascent_gain(const PolicyParams& policy, const Prompt& prompt, double eta, std::uint64_t cap = 1'000'000);

ProgressResult check_variance_progress(const PolicyParams& policy, const Prompt& prompt, const ProgressOptions& options,
                                       Rng& rng);

struct DecompositionResult {
  CheckStatus status = CheckStatus::skipped;
  double total_var = 0.0;  // P(1 - P)
  double intra_var = 0.0;  // E_Z[p_Z (1 - p_Z)]
  double inter_var = 0.0;  // Var_Z[p_Z]
  double residual = 0.0;   // |intra + inter - total|
  double tolerance = 1e-10;
};

DecompositionResult check_total_variance_decomposition(const PolicyParams& policy, const Prompt& prompt,
                                                       double tolerance = 1e-10, std::uint64_t cap = 1'000'000);

/// Lower bound Var_Z[p_Z] >= (L'^2 / 4) E[d^2] under the premise |p_z - p_z'| >= L' d(z, z').
struct EfronSteinResult {
  CheckStatus status = CheckStatus::skipped;
  double var_z = 0.0;
  double lipschitz_sampled = 0.0;  // max ratio over sampled pairs with d > 0
  double lipschitz_premise = 0.0;  // largest L' <= lipschitz_sampled valid on every support pair
  double expected_d2 = 0.0;        // exact E[d(Z, Z')^2]
  double rhs = 0.0;
  int n_pairs = 0;
};

EfronSteinResult check_efron_stein(const PolicyParams& policy, const Prompt& prompt, int n_pairs, Rng& rng,
                                   std::uint64_t cap = 4096);

struct TdsConsistencyResult {
  CheckStatus status = CheckStatus::skipped;
  double population_mean = 0.0;  // E[d^2] over independent pairs
  double population_std = 0.0;   // std of d^2 over independent pairs
  std::vector<int> k_grid;
  std::vector<double> median_abs_error;  // per K, median over seeds
  double threshold = 0.0;                // 5 * population_std / sqrt(K_max)
  int n_seeds = 0;
};

TdsConsistencyResult estimate_tds_consistency(const PolicyParams& policy, const Prompt& prompt,
                                              std::span<const int> k_grid, int n_seeds, std::uint64_t seed,
                                              std::uint64_t cap = 4096);

struct BaselineGridResult {
  std::vector<double> grid;
  std::vector<double> empirical_trace_variance;
  std::vector<double> exact_trace_variance;
  double mean_reward = 0.0;        // exact E[R]
  double weighted_optimum = 0.0;   // E[|g|^2 R] / E[|g|^2], the exact trace-variance minimizer
  int empirical_argmin = 0;
  int exact_argmin = 0;
  int nearest_to_mean = 0;
  bool holds = false;              // empirical argmin is the grid point nearest E[R]
  int draws = 0;
};

/// Single-rollout REINFORCE draws shared across every grid point.
BaselineGridResult baseline_grid_analysis(const PolicyParams& policy, const Prompt& prompt, std::span<const double> grid,
                                          int draws, Rng& rng, std::uint64_t cap = 1'000'000);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

struct SurrogateResult {
  double spearman = 0.0;
  int n_prompts = 0;
  int n_rollouts = 0;
  std::vector<double> vps;
  std::vector<double> reward_variance;
};

SurrogateResult vps_surrogate_check(const PolicySet& policies, const Corpus& corpus, int n_rollouts,
                                    const VpsWeights& weights, const DiversityConfig& diversity, Rng& rng);

struct TheoryOptions {
  ProgressOptions progress;
  int efron_stein_pairs = 2000;
  std::vector<int> tds_k_grid{4, 16, 64, 256};
  int tds_seeds = 30;
  std::vector<double> baseline_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  int baseline_draws = 100'000;
  int surrogate_rollouts = 256;
  VpsWeights weights;
  DiversityConfig diversity;
  std::uint64_t cap = 1'000'000;
  std::uint64_t pair_cap = 4096;
};

struct TheoryPromptRecord {
  PromptId prompt_id = 0;
  std::string error;  // non-empty when enumeration was refused
  SandwichResult sandwich;
  ProgressResult progress;
  DecompositionResult decomposition;
  EfronSteinResult efron_stein;
  TdsConsistencyResult tds;
  BaselineGridResult baseline;
};

struct TheoryReport {
  std::vector<TheoryPromptRecord> prompts;
  SurrogateResult surrogate;

  /// Sandwich, progress, decomposition and TDS consistency must hold (or be vacuous);
  /// Efron-Stein must not be violated. Baseline grid and surrogate are diagnostics.
  bool hard_checks_pass() const;
  std::vector<std::string> failures() const;
  std::string to_json() const;
};

TheoryReport run_theory_checks(const PolicySet& policies, const Corpus& corpus, const TheoryOptions& options,
                               std::uint64_t seed);

}  // namespace vas
