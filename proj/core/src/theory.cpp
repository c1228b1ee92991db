// SPDX-License-Identifier: Apache-2.0
#include "vas/theory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "vas/optimizer.hpp"

namespace vas {

std::string_view to_string(CheckStatus status) {
  switch (status) {
    case CheckStatus::holds: return "holds";
    case CheckStatus::violated: return "violated";
    case CheckStatus::vacuous: return "vacuous";
    case CheckStatus::premise_failed: return "premise_failed";
    case CheckStatus::skipped: return "skipped";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Support {
  std::vector<TokenSeq> seqs;
  std::vector<double> probs;
  std::vector<double> success;
};

Support enumerate_support(const PolicyParams& policy, const Prompt& prompt, std::uint64_t cap) {
  Support s;
  for_each_trajectory(policy, cap, [&](std::span<const Token> tokens, double pi) {
    if (pi <= 0.0) return;
    s.seqs.emplace_back(tokens.begin(), tokens.end());
    s.probs.push_back(pi);
    s.success.push_back(success_probability(prompt, answer_map(tokens, prompt)));
  });
  return s;
}

VectorXd ascending_eigenvalues(const MatrixXd& m) {
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  return solver.eigenvalues();
}

// Orthonormal basis of the directions that change the policy: per-position sum-zero vectors.
MatrixXd identifiable_basis(int V, int T) {
  MatrixXd q = MatrixXd::Zero(static_cast<Eigen::Index>(V) * T, static_cast<Eigen::Index>(V - 1) * T);
  for (int t = 0; t < T; ++t)
    for (int k = 1; k < V; ++k) {
      const double norm = std::sqrt(static_cast<double>(k) * (k + 1));
      const Eigen::Index col = static_cast<Eigen::Index>(t) * (V - 1) + (k - 1);
      for (int v = 0; v < k; ++v) q(static_cast<Eigen::Index>(t) * V + v, col) = 1.0 / norm;
      q(static_cast<Eigen::Index>(t) * V + k, col) = -static_cast<double>(k) / norm;
    }
  return q;
}

PolicyParams shifted(const PolicyParams& policy, std::span<const double> direction, double scale) {
  std::vector<double> logits(policy.logits().begin(), policy.logits().end());
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += scale * direction[i];
  return PolicyParams(policy.vocab_size(), policy.seq_len(), std::move(logits));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::vector<double> exact_estimator_covariance(const PolicyParams& policy, const Prompt& prompt, double baseline,
                                               std::uint64_t cap) {
  const std::size_t d = policy.dim();
  const auto probs = policy.probabilities();
  std::vector<double> second(d * d, 0.0);
  std::vector<double> mean(d, 0.0);
  GradientVector g(d);
  for_each_trajectory(policy, cap, [&](std::span<const Token> tokens, double pi) {
    if (pi == 0.0) return;
    const double s = success_probability(prompt, answer_map(tokens, prompt));
    const double w2 = s * (1.0 - baseline) * (1.0 - baseline) + (1.0 - s) * baseline * baseline;
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_score(probs, policy.vocab_size(), tokens, 1.0, g);
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] += pi * (s - baseline) * g[i];
      const double gi = pi * w2 * g[i];
      if (gi == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) second[i * d + j] += gi * g[j];
    }
  });
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) second[i * d + j] -= mean[i] * mean[j];
  return second;
}

SandwichResult check_variance_sandwich(const PolicyParams& policy, const Prompt& prompt, double tolerance,
                                       std::uint64_t cap) {
  const auto stats = enumerate_exact(policy, prompt, {cap, true});
  const auto d = static_cast<Eigen::Index>(policy.dim());
  SandwichResult r;
  r.tolerance = tolerance;
  r.reward_variance = stats.reward_variance;

  const MatrixXd gamma = Eigen::Map<const MatrixXd>(stats.fisher.data(), d, d);
  const auto cov_flat = exact_estimator_covariance(policy, prompt, stats.pass_rate, cap);
  const MatrixXd cov = Eigen::Map<const MatrixXd>(cov_flat.data(), d, d);

  const VectorXd gamma_eig = ascending_eigenvalues(gamma);
  const VectorXd cov_eig = ascending_eigenvalues(cov);
  r.gamma_eigen_min = gamma_eig(0);
  r.gamma_eigen_max = gamma_eig(d - 1);
  r.var_g_eigenvalues.assign(cov_eig.data(), cov_eig.data() + d);

  r.lower_bound = r.gamma_eigen_min * r.reward_variance;
  r.upper_bound = 2.0 * policy.seq_len() * r.reward_variance;
  for (double e : r.var_g_eigenvalues) {
    r.max_lower_violation = std::max(r.max_lower_violation, r.lower_bound - e);
    r.max_upper_violation = std::max(r.max_upper_violation, e - r.upper_bound);
  }

  const MatrixXd q = identifiable_basis(policy.vocab_size(), policy.seq_len());
  const VectorXd gamma_id = ascending_eigenvalues(q.transpose() * gamma * q);
  const VectorXd cov_id = ascending_eigenvalues(q.transpose() * cov * q);
  r.gamma_eigen_min_identifiable = gamma_id(0);
  r.identifiable_lower_holds = cov_id(0) >= r.gamma_eigen_min_identifiable * r.reward_variance - tolerance;

  const bool within = r.max_lower_violation <= tolerance && r.max_upper_violation <= tolerance;
  if (r.reward_variance == 0.0)
    r.status = within ? CheckStatus::vacuous : CheckStatus::violated;
  else
    r.status = within ? CheckStatus::holds : CheckStatus::violated;
  return r;
}

double estimate_smoothness(const PolicyParams& policy, const Prompt& prompt, int probes, double step, Rng& rng,
                           std::uint64_t cap) {
  if (probes < 1) throw std::invalid_argument("estimate_smoothness: probes must be >= 1");
  if (!(step > 0.0)) throw std::invalid_argument("estimate_smoothness: step must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double j0 = exact_pass_rate(policy, prompt, cap);
  std::vector<double> u(policy.dim());
  double worst = 0.0;
  for (int k = 0; k < probes; ++k) {
    double norm = 0.0;
    for (double& x : u) {
      x = normal(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : u) x /= norm;
    const double jp = exact_pass_rate(shifted(policy, u, step), prompt, cap);
    const double jm = exact_pass_rate(shifted(policy, u, -step), prompt, cap);
    worst = std::max(worst, std::abs(jp - 2.0 * j0 + jm) / (step * step));
  }
  return worst;
}

double exact_ascent_gain(const PolicyParams& policy, const Prompt& prompt, double eta, std::uint64_t cap) {
  const auto stats = enumerate_exact(policy, prompt, {cap, false});
  PolicyParams next = policy;
  apply_update(next, stats.true_gradient, eta);
  return exact_pass_rate(next, prompt, cap) - stats.pass_rate;
}

ProgressResult check_variance_progress(const PolicyParams& policy, const Prompt& prompt, const ProgressOptions& options,
                                       Rng& rng) {
  if (options.draws < 2) throw std::invalid_argument("check_variance_progress: need at least 2 draws");
  const auto stats = enumerate_exact(policy, prompt, {options.cap, false});
  ProgressResult r;
  r.reward_variance = stats.reward_variance;
  r.grad_norm_sq = 0.0;
  for (double g : stats.true_gradient) r.grad_norm_sq += g * g;
  if (r.reward_variance < 1e-12) {
    r.status = CheckStatus::vacuous;
    return r;
  }
  r.c_min = r.grad_norm_sq / r.reward_variance;
  r.smoothness = options.smoothness_safety *
                 estimate_smoothness(policy, prompt, options.curvature_probes, options.probe_step, rng, options.cap);
  if (r.smoothness > 0.0) {
    r.eta = r.c_min / (4.0 * r.smoothness);
    const double g_max_sq = 2.0 * policy.seq_len();
    r.eta_conservative = r.c_min / (2.0 * r.smoothness * (r.c_min + static_cast<double>(policy.dim()) * g_max_sq));
  }
  r.bound_rhs = r.eta * r.c_min / 4.0 * r.reward_variance;

  const Baseline baseline{BaselineMode::optimal, stats.pass_rate};
  double mean = 0.0;
  double m2 = 0.0;
  std::vector<TokenSeq> seqs;
  std::vector<double> rewards;
  for (int k = 0; k < options.draws; ++k) {
    const auto rollouts = sample_rollouts(policy, prompt, options.group_size, rng);
    seqs.clear();
    rewards.clear();
    for (const auto& ro : rollouts) {
      seqs.push_back(ro.tokens);
      rewards.push_back(ro.reward);
    }
    PolicyParams next = policy;
    apply_update(next, reinforce_grad(policy, seqs, rewards, baseline), r.eta);
    const double gain = exact_pass_rate(next, prompt, options.cap) - stats.pass_rate;
    const double delta = gain - mean;
    mean += delta / (k + 1);
    m2 += delta * (gain - mean);
  }
  r.draws = options.draws;
  r.mean_gain = mean;
  r.gain_standard_error = std::sqrt(m2 / (options.draws - 1) / options.draws);
  r.status = r.mean_gain + options.z * r.gain_standard_error >= r.bound_rhs ? CheckStatus::holds : CheckStatus::violated;
  return r;
}

DecompositionResult check_total_variance_decomposition(const PolicyParams& policy, const Prompt& prompt,
                                                       double tolerance, std::uint64_t cap) {
  double p = 0.0;
  double intra = 0.0;
  double second = 0.0;
  for_each_trajectory(policy, cap, [&](std::span<const Token> tokens, double pi) {
    const double s = success_probability(prompt, answer_map(tokens, prompt));
    p += pi * s;
    intra += pi * s * (1.0 - s);
    second += pi * s * s;
  });
  DecompositionResult r;
  r.tolerance = tolerance;
  r.total_var = p * (1.0 - p);
  r.intra_var = intra;
  r.inter_var = std::max(0.0, second - p * p);
  r.residual = std::abs(r.intra_var + r.inter_var - r.total_var);
  r.status = r.residual <= tolerance ? CheckStatus::holds : CheckStatus::violated;
  return r;
}

EfronSteinResult check_efron_stein(const PolicyParams& policy, const Prompt& prompt, int n_pairs, Rng& rng,
                                   std::uint64_t cap) {
  if (n_pairs < 1) throw std::invalid_argument("check_efron_stein: n_pairs must be >= 1");
  const Support s = enumerate_support(policy, prompt, cap);
  EfronSteinResult r;
  r.n_pairs = n_pairs;

  double p_bar = 0.0;
  for (std::size_t i = 0; i < s.seqs.size(); ++i) p_bar += s.probs[i] * s.success[i];
  for (std::size_t i = 0; i < s.seqs.size(); ++i) r.var_z += s.probs[i] * (s.success[i] - p_bar) * (s.success[i] - p_bar);

  double premise = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.seqs.size(); ++i)
    for (std::size_t j = i + 1; j < s.seqs.size(); ++j) {
      const double d = norm_edit_distance(s.seqs[i], s.seqs[j]);
      r.expected_d2 += 2.0 * s.probs[i] * s.probs[j] * d * d;
      if (d > 0.0) premise = std::min(premise, std::abs(s.success[i] - s.success[j]) / d);
    }

  for (int k = 0; k < n_pairs; ++k) {
    const auto pair = sample(policy, 2, rng);
    const double d = norm_edit_distance(pair[0], pair[1]);
    if (d <= 0.0) continue;
    const double dp = std::abs(success_probability(prompt, answer_map(pair[0], prompt)) -
                               success_probability(prompt, answer_map(pair[1], prompt)));
    r.lipschitz_sampled = std::max(r.lipschitz_sampled, dp / d);
  }
  r.lipschitz_premise = std::isfinite(premise) ? std::min(premise, r.lipschitz_sampled) : r.lipschitz_sampled;
  r.rhs = r.lipschitz_premise * r.lipschitz_premise / 4.0 * r.expected_d2;

  if (r.var_z <= 1e-15)
    r.status = r.rhs <= 1e-15 ? CheckStatus::vacuous : CheckStatus::violated;
  else if (r.lipschitz_premise <= 0.0)
    r.status = CheckStatus::premise_failed;
  else
    r.status = r.var_z >= r.rhs - 1e-12 ? CheckStatus::holds : CheckStatus::violated;
  return r;
}

TdsConsistencyResult estimate_tds_consistency(const PolicyParams& policy, const Prompt& prompt,
                                              std::span<const int> k_grid, int n_seeds, std::uint64_t seed,
                                              std::uint64_t cap) {
  if (k_grid.empty()) throw std::invalid_argument("estimate_tds_consistency: empty K grid");
  for (int k : k_grid)
    if (k < 2) throw std::invalid_argument("estimate_tds_consistency: every K must be >= 2");
  if (n_seeds < 1) throw std::invalid_argument("estimate_tds_consistency: n_seeds must be >= 1");
  const Support s = enumerate_support(policy, prompt, cap);
  TdsConsistencyResult r;
  r.k_grid.assign(k_grid.begin(), k_grid.end());
  r.n_seeds = n_seeds;

  double m2 = 0.0;
  double m4 = 0.0;
  for (std::size_t i = 0; i < s.seqs.size(); ++i)
    for (std::size_t j = i + 1; j < s.seqs.size(); ++j) {
      const double d = norm_edit_distance(s.seqs[i], s.seqs[j]);
      const double w = 2.0 * s.probs[i] * s.probs[j];
      m2 += w * d * d;
      m4 += w * d * d * d * d;
    }
  r.population_mean = m2;
  r.population_std = std::sqrt(std::max(0.0, m4 - m2 * m2));
  r.threshold = 5.0 * r.population_std / std::sqrt(static_cast<double>(k_grid.back()));

  std::vector<std::vector<double>> errors(k_grid.size());
  for (int seed_index = 0; seed_index < n_seeds; ++seed_index) {
    Rng rng(derive_seed(seed, "tds_consistency/" + std::to_string(seed_index)));
    for (std::size_t k = 0; k < k_grid.size(); ++k)
      errors[k].push_back(std::abs(tds_ustat(sample(policy, k_grid[k], rng)) - r.population_mean));
  }
  for (auto& e : errors) r.median_abs_error.push_back(median(std::move(e)));

  const double first = r.median_abs_error.front();
  const double last = r.median_abs_error.back();
  const bool degenerate = first == 0.0 && last == 0.0 && r.threshold == 0.0;
  r.status = degenerate || (last < first && last < r.threshold) ? CheckStatus::holds : CheckStatus::violated;
  if (degenerate) r.status = CheckStatus::vacuous;
  return r;
}

BaselineGridResult baseline_grid_analysis(const PolicyParams& policy, const Prompt& prompt, std::span<const double> grid,
                                          int draws, Rng& rng, std::uint64_t cap) {
  if (grid.empty()) throw std::invalid_argument("baseline_grid_analysis: empty grid");
  if (draws < 2) throw std::invalid_argument("baseline_grid_analysis: need at least 2 draws");
  const std::size_t d = policy.dim();
  const auto probs = policy.probabilities();
  BaselineGridResult r;
  r.grid.assign(grid.begin(), grid.end());
  r.draws = draws;

  // Exact moments: E[|g|^2 s], E[|g|^2], E[g s], E[g].
  double g2s = 0.0;
  double g2 = 0.0;
  std::vector<double> gs(d, 0.0);
  std::vector<double> gm(d, 0.0);
  GradientVector g(d);
  for_each_trajectory(policy, cap, [&](std::span<const Token> tokens, double pi) {
    const double s = success_probability(prompt, answer_map(tokens, prompt));
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_score(probs, policy.vocab_size(), tokens, 1.0, g);
    const double n2 = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    r.mean_reward += pi * s;
    g2s += pi * n2 * s;
    g2 += pi * n2;
    for (std::size_t i = 0; i < d; ++i) {
      gs[i] += pi * s * g[i];
      gm[i] += pi * g[i];
    }
  });
  r.weighted_optimum = g2 > 0.0 ? g2s / g2 : r.mean_reward;
  for (double b : grid) {
    // E[|g|^2 (R - b)^2] with R in {0, 1}: E[|g|^2 s] (1 - 2b) + b^2 E[|g|^2].
    const double second = g2s * (1.0 - 2.0 * b) + b * b * g2;
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double m = gs[i] - b * gm[i];
      mean_sq += m * m;
    }
    r.exact_trace_variance.push_back(second - mean_sq);
  }

  std::vector<std::vector<double>> sums(grid.size(), std::vector<double>(d, 0.0));
  std::vector<double> sum_sq(grid.size(), 0.0);
  for (int k = 0; k < draws; ++k) {
    const auto ro = sample_rollouts(policy, prompt, 1, rng).front();
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_score(probs, policy.vocab_size(), ro.tokens, 1.0, g);
    const double n2 = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
    for (std::size_t b = 0; b < grid.size(); ++b) {
      const double w = ro.reward - grid[b];
      for (std::size_t i = 0; i < d; ++i) sums[b][i] += w * g[i];
      sum_sq[b] += w * w * n2;
    }
  }
  const double n = static_cast<double>(draws);
  for (std::size_t b = 0; b < grid.size(); ++b) {
    double mean_sq = 0.0;
    for (double x : sums[b]) mean_sq += x * x;
    r.empirical_trace_variance.push_back((sum_sq[b] - mean_sq / n) / (n - 1.0));
  }

  auto argmin = [](const std::vector<double>& v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  r.empirical_argmin = argmin(r.empirical_trace_variance);
  r.exact_argmin = argmin(r.exact_trace_variance);
  std::vector<double> distance;
  for (double b : grid) distance.push_back(std::abs(b - r.mean_reward));
  r.nearest_to_mean = argmin(distance);
  r.holds = r.empirical_argmin == r.nearest_to_mean;
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

SurrogateResult vps_surrogate_check(const PolicySet& policies, const Corpus& corpus, int n_rollouts,
                                    const VpsWeights& weights, const DiversityConfig& diversity, Rng& rng) {
  if (policies.size() != corpus.size()) throw std::invalid_argument("vps_surrogate_check: policy/corpus size mismatch");
  SurrogateResult r;
  r.n_rollouts = n_rollouts;
  r.n_prompts = static_cast<int>(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    r.vps.push_back(estimate_record(policies[i], corpus.prompts[i], n_rollouts, 0, weights, diversity, rng).vps);
    r.reward_variance.push_back(enumerate_exact(policies[i], corpus.prompts[i], {1'000'000, false}).reward_variance);
  }
  r.spearman = spearman(r.vps, r.reward_variance);
  return r;
}

bool TheoryReport::hard_checks_pass() const { return failures().empty(); }

std::vector<std::string> TheoryReport::failures() const {
  std::vector<std::string> out;
  auto ok = [](CheckStatus s) { return s == CheckStatus::holds || s == CheckStatus::vacuous; };
  for (const auto& p : prompts) {
    const std::string tag = "prompt " + std::to_string(p.prompt_id) + ": ";
    if (!p.error.empty()) {
      out.push_back(tag + p.error);
      continue;
    }
    if (!ok(p.sandwich.status)) out.push_back(tag + "variance sandwich violated");
    if (!ok(p.progress.status)) out.push_back(tag + "variance-progress inequality violated");
    if (!ok(p.decomposition.status)) out.push_back(tag + "total-variance decomposition violated");
    if (p.efron_stein.status == CheckStatus::violated) out.push_back(tag + "Efron-Stein bound violated");
    if (!ok(p.tds.status)) out.push_back(tag + "TDS U-statistic consistency failed");
  }
  return out;
}

std::string TheoryReport::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  ordered_json arr = ordered_json::array();
  for (const auto& p : prompts) {
    ordered_json o;
    o["prompt_id"] = p.prompt_id;
    if (!p.error.empty()) {
      o["error"] = p.error;
      arr.push_back(std::move(o));
      continue;
    }
    o["reward_variance"] = p.sandwich.reward_variance;
    o["gamma_eigen_min"] = p.sandwich.gamma_eigen_min;
    o["gamma_eigen_max"] = p.sandwich.gamma_eigen_max;
    o["grad_norm_sq"] = p.progress.grad_norm_sq;
    o["c_min_estimate"] = p.progress.c_min;
    o["one_step_gain"] = p.progress.mean_gain;
    o["bound_rhs"] = p.progress.bound_rhs;
    o["intra_var"] = p.decomposition.intra_var;
    o["inter_var"] = p.decomposition.inter_var;
    o["total_var"] = p.decomposition.total_var;
    o["efron_stein_lhs"] = p.efron_stein.var_z;
    o["efron_stein_rhs_scaled"] = p.efron_stein.rhs;

    auto& sw = o["sandwich"];
    sw["status"] = to_string(p.sandwich.status);
    sw["lower_bound"] = p.sandwich.lower_bound;
    sw["upper_bound"] = p.sandwich.upper_bound;
    sw["var_g_eigen_min"] = p.sandwich.var_g_eigenvalues.empty() ? 0.0 : p.sandwich.var_g_eigenvalues.front();
    sw["var_g_eigen_max"] = p.sandwich.var_g_eigenvalues.empty() ? 0.0 : p.sandwich.var_g_eigenvalues.back();
    sw["max_lower_violation"] = p.sandwich.max_lower_violation;
    sw["max_upper_violation"] = p.sandwich.max_upper_violation;
    sw["gamma_eigen_min_identifiable"] = p.sandwich.gamma_eigen_min_identifiable;
    sw["identifiable_lower_holds"] = p.sandwich.identifiable_lower_holds;

    auto& pr = o["progress"];
    pr["status"] = to_string(p.progress.status);
    pr["smoothness"] = p.progress.smoothness;
    pr["eta"] = p.progress.eta;
    pr["eta_conservative"] = p.progress.eta_conservative;
    pr["gain_standard_error"] = p.progress.gain_standard_error;
    pr["draws"] = p.progress.draws;

    auto& de = o["decomposition"];
    de["status"] = to_string(p.decomposition.status);
    de["residual"] = p.decomposition.residual;

    auto& es = o["efron_stein"];
    es["status"] = to_string(p.efron_stein.status);
    es["lipschitz_sampled"] = p.efron_stein.lipschitz_sampled;
    es["lipschitz_premise"] = p.efron_stein.lipschitz_premise;
    es["expected_d2"] = p.efron_stein.expected_d2;
    es["n_pairs"] = p.efron_stein.n_pairs;

    auto& td = o["tds_consistency"];
    td["status"] = to_string(p.tds.status);
    td["population_mean"] = p.tds.population_mean;
    td["population_std"] = p.tds.population_std;
    td["k_grid"] = p.tds.k_grid;
    td["median_abs_error"] = p.tds.median_abs_error;
    td["threshold"] = p.tds.threshold;

    auto& bl = o["baseline_grid"];
    bl["grid"] = p.baseline.grid;
    bl["empirical_trace_variance"] = p.baseline.empirical_trace_variance;
    bl["exact_trace_variance"] = p.baseline.exact_trace_variance;
    bl["mean_reward"] = p.baseline.mean_reward;
    bl["weighted_optimum"] = p.baseline.weighted_optimum;
    bl["empirical_argmin"] = p.baseline.empirical_argmin;
    bl["nearest_to_mean"] = p.baseline.nearest_to_mean;
    bl["holds"] = p.baseline.holds;
    arr.push_back(std::move(o));
  }
  j["prompts"] = std::move(arr);
  auto& sg = j["vps_surrogate"];
  sg["spearman"] = surrogate.spearman;
  sg["n_prompts"] = surrogate.n_prompts;
  sg["n_rollouts"] = surrogate.n_rollouts;
  const auto fails = failures();
  j["failures"] = fails;
  j["hard_checks_pass"] = fails.empty();
  return j.dump(2) + "\n";
}

TheoryReport run_theory_checks(const PolicySet& policies, const Corpus& corpus, const TheoryOptions& options,
                               std::uint64_t seed) {
  if (policies.size() != corpus.size()) throw std::invalid_argument("run_theory_checks: policy/corpus size mismatch");
  TheoryReport report;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& prompt = corpus.prompts[i];
    const auto& policy = policies[i];
    TheoryPromptRecord rec;
    rec.prompt_id = prompt.id;
    Rng rng(derive_seed(seed, "theory/" + std::to_string(prompt.id)));
    try {
      rec.sandwich = check_variance_sandwich(policy, prompt, 1e-9, options.cap);
      auto progress = options.progress;
      progress.cap = options.cap;
      rec.progress = check_variance_progress(policy, prompt, progress, rng);
      rec.decomposition = check_total_variance_decomposition(policy, prompt, 1e-10, options.cap);
      rec.efron_stein = check_efron_stein(policy, prompt, options.efron_stein_pairs, rng, options.pair_cap);
      rec.tds = estimate_tds_consistency(policy, prompt, options.tds_k_grid, options.tds_seeds, rng(), options.pair_cap);
      rec.baseline = baseline_grid_analysis(policy, prompt, options.baseline_grid, options.baseline_draws, rng, options.cap);
    } catch (const EnumerationLimitError& e) {
      rec.error = e.what();
    }
    report.prompts.push_back(std::move(rec));
  }
  Rng rng(derive_seed(seed, "theory/surrogate"));
  try {
    report.surrogate = vps_surrogate_check(policies, corpus, options.surrogate_rollouts, options.weights,
                                           options.diversity, rng);
  } catch (const EnumerationLimitError&) {
    report.surrogate = {};
  }
  return report;
}

}  // namespace vas
