// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/rng.hpp"

namespace vas {

/// Flat gradient over one prompt's logits, laid out like PolicyParams::logits().
using GradientVector = std::vector<double>;

/// Position-factorized softmax policy for a single prompt:
/// pi(y) = prod_t softmax(logits[t])[y_t], logits stored row-major [T][V].
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(int vocab_size, int seq_len);
  PolicyParams(int vocab_size, int seq_len, std::vector<double> logits);

  int vocab_size() const { return vocab_size_; }
  int seq_len() const { return seq_len_; }
  std::size_t dim() const { return logits_.size(); }

  double logit(int t, int v) const { return logits_[index(t, v)]; }
  double& logit(int t, int v) { return logits_[index(t, v)]; }
  std::span<const double> row(int t) const { return {logits_.data() + index(t, 0), static_cast<std::size_t>(vocab_size_)}; }
  std::span<const double> logits() const { return logits_; }
  std::span<double> logits() { return logits_; }

  /// Softmax of every position, same layout as logits().
  std::vector<double> probabilities() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  std::size_t index(int t, int v) const {
    return static_cast<std::size_t>(t) * static_cast<std::size_t>(vocab_size_) + static_cast<std::size_t>(v);
  }

  int vocab_size_ = 0;
  int seq_len_ = 0;
  std::vector<double> logits_;
};

/// Per-prompt policies, index-aligned with Corpus::prompts.
using PolicySet = std::vector<PolicyParams>;

/// Logits ~ N(0, base_scale^2); then every token off a prompt-specific anchor chain is
/// shifted by -|difficulty_bias|. The anchor answers wrongly for bias >= 0 (mass moves
/// away from correct chains) and correctly for bias < 0 (a head start).
PolicySet init_policy(const Corpus& corpus, double base_scale, std::uint64_t seed);

/// Policy whose every position puts essentially all mass on `tokens` (logit margin `margin`).
PolicyParams concentrated_policy(int vocab_size, const TokenSeq& tokens, double margin);

/// n i.i.d. trajectories.
std::vector<TokenSeq> sample(const PolicyParams& params, int n, Rng& rng);

/// n i.i.d. trajectories with answers and verifier rewards filled in.
std::vector<Rollout> sample_rollouts(const PolicyParams& params, const Prompt& prompt, int n, Rng& rng);

/// Exact log-probability via per-position log-sum-exp.
double log_prob(const PolicyParams& params, std::span<const Token> tokens);

/// Score function: entry (t, v) = 1{y_t = v} - softmax(logits[t])[v].
GradientVector score(const PolicyParams& params, std::span<const Token> tokens);

/// out += weight * score(tokens), given precomputed probabilities().
void accumulate_score(std::span<const double> probs, int vocab_size, std::span<const Token> tokens,
                      double weight, std::span<double> out);

/// Number of trajectories V^T, saturating at UINT64_MAX.
std::uint64_t trajectory_count(int vocab_size, int seq_len);

/// Thrown when an exact computation would enumerate more trajectories than allowed.
class EnumerationLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Calls fn(tokens, probability) for every trajectory in lexicographic order.
/// Probabilities are products of softmax entries (not exp of log_prob).
void for_each_trajectory(const PolicyParams& params, std::uint64_t cap,
                         const std::function<void(std::span<const Token>, double)>& fn);

struct EnumerationOptions {
  std::uint64_t cap = 1'000'000;
  bool with_fisher = true;
};

/// Exact expectations under the policy and verifier.
struct ExactStats {
  double total_probability = 0.0;  // sum of pi(y); 1 up to rounding
  double pass_rate = 0.0;          // E[R]
  double second_moment = 0.0;      // E[R^2]
  double reward_variance = 0.0;    // E[R^2] - E[R]^2
  GradientVector mean_score;       // E[g]; zero up to rounding
  GradientVector true_gradient;    // E[R g] = grad J_x
  std::vector<double> fisher;      // E[g g^T], dim x dim row-major (empty unless requested)
};

ExactStats enumerate_exact(const PolicyParams& params, const Prompt& prompt,
                           const EnumerationOptions& options = {});

/// Exact J_x = P(x) without gradient bookkeeping.
double exact_pass_rate(const PolicyParams& params, const Prompt& prompt, std::uint64_t cap = 1'000'000);

}  // namespace vas
