// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/policy.hpp"

namespace vas {

enum class BaselineMode { none, mean, optimal };
enum class Estimator { reinforce, grpo };

std::string_view to_string(BaselineMode mode);
std::string_view to_string(Estimator estimator);
BaselineMode parse_baseline_mode(std::string_view name);
Estimator parse_estimator(std::string_view name);

/// none: b = 0. mean: b = sample mean of the group (O(1/N) bias).
/// optimal: b = value, where the caller supplies the exact E[R] (or any fixed constant).
struct Baseline {
  BaselineMode mode = BaselineMode::none;
  double value = 0.0;
};

struct UpdateConfig {
  double learning_rate = 1.0;
  double clip_epsilon = 0.2;
  int group_size = 8;
  BaselineMode baseline_mode = BaselineMode::mean;
  Estimator estimator = Estimator::grpo;
  double whitening_delta = 1e-4;
  int inner_epochs = 1;
  bool kl_penalty = false;
  double kl_coef = 0.01;

  void validate() const;
};

/// (1/N) sum_i g(y_i) (R_i - b).
GradientVector reinforce_grad(const PolicyParams& policy, std::span<const TokenSeq> rollouts,
                              std::span<const double> rewards, const Baseline& baseline);

struct GroupAdvantage {
  std::vector<double> rewards;
  double mean = 0.0;
  double std = 0.0;  // population (divide by N)
  std::vector<double> whitened;
  double delta = 0.0;
};

/// whitened_i = (R_i - mean) / (std + delta).
GroupAdvantage grpo_advantages(std::span<const double> rewards, double delta);

/// Counts of surrogate terms whose clipped branch is the active one.
struct ClipStats {
  std::size_t clipped = 0;
  std::size_t total = 0;

  double fraction() const { return total == 0 ? 0.0 : static_cast<double>(clipped) / static_cast<double>(total); }
  ClipStats& operator+=(const ClipStats& other) {
    clipped += other.clipped;
    total += other.total;
    return *this;
  }
};

struct GrpoGradient {
  GradientVector gradient;
  ClipStats clip;
};

/// Value of (1/N) sum_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i), r_i = pi_cur(y_i)/pi_old(y_i).
double grpo_surrogate(const PolicyParams& current, const PolicyParams& old, std::span<const TokenSeq> rollouts,
                      std::span<const double> advantages, double clip_epsilon);

/// Gradient of grpo_surrogate with respect to the current logits.
GrpoGradient grpo_grad(const PolicyParams& current, const PolicyParams& old, std::span<const TokenSeq> rollouts,
                       std::span<const double> advantages, double clip_epsilon);

/// coef * (1/N) sum_i 0.5 * (log pi_cur(y_i) - log pi_ref(y_i))^2.
double kl_penalty_value(const PolicyParams& current, const PolicyParams& reference,
                        std::span<const TokenSeq> rollouts, double coef);
/// Ascent direction of -kl_penalty_value, accumulated into out.
void accumulate_kl_penalty_grad(const PolicyParams& current, const PolicyParams& reference,
                                std::span<const TokenSeq> rollouts, double coef, std::span<double> out);

/// theta += eta * grad. Throws std::invalid_argument on shape mismatch or non-finite input.
void apply_update(PolicyParams& policy, std::span<const double> grad, double eta);

double l2_norm(std::span<const double> v);

}  // namespace vas
