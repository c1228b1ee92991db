// SPDX-License-Identifier: Apache-2.0
#include "vas/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vas {

std::string_view to_string(BaselineMode mode) {
  switch (mode) {
    case BaselineMode::none: return "none";
    case BaselineMode::mean: return "mean";
    case BaselineMode::optimal: return "optimal";
  }
  return "unknown";
}

std::string_view to_string(Estimator estimator) {
  return estimator == Estimator::grpo ? "grpo" : "reinforce";
}

BaselineMode parse_baseline_mode(std::string_view name) {
  if (name == "none") return BaselineMode::none;
  if (name == "mean") return BaselineMode::mean;
  if (name == "optimal") return BaselineMode::optimal;
  throw std::invalid_argument("unknown baseline mode: " + std::string(name));
}

Estimator parse_estimator(std::string_view name) {
  if (name == "grpo") return Estimator::grpo;
  if (name == "reinforce") return Estimator::reinforce;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

void UpdateConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("UpdateConfig: learning_rate must be positive and finite");
  if (!(clip_epsilon >= 0.0)) throw std::invalid_argument("UpdateConfig: clip_epsilon must be >= 0");
  if (group_size < 2) throw std::invalid_argument("UpdateConfig: group_size must be >= 2");
  if (!(whitening_delta > 0.0) || !std::isfinite(whitening_delta))
    throw std::invalid_argument("UpdateConfig: whitening_delta must be positive and finite");
  if (inner_epochs < 1) throw std::invalid_argument("UpdateConfig: inner_epochs must be >= 1");
  if (!(kl_coef >= 0.0) || !std::isfinite(kl_coef)) throw std::invalid_argument("UpdateConfig: kl_coef must be >= 0");
}

GradientVector reinforce_grad(const PolicyParams& policy, std::span<const TokenSeq> rollouts,
                              std::span<const double> rewards, const Baseline& baseline) {
  if (rollouts.empty()) throw std::invalid_argument("reinforce_grad: need at least one rollout");
  if (rollouts.size() != rewards.size()) throw std::invalid_argument("reinforce_grad: rollouts/rewards size mismatch");
  double b = 0.0;
  switch (baseline.mode) {
    case BaselineMode::none: b = 0.0; break;
    case BaselineMode::optimal: b = baseline.value; break;
    case BaselineMode::mean: {
      double s = 0.0;
      for (double r : rewards) s += r;
      b = s / static_cast<double>(rewards.size());
      break;
    }
  }
  const auto probs = policy.probabilities();
  GradientVector grad(policy.dim(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const double w = (rewards[i] - b) * inv_n;
    if (w != 0.0) accumulate_score(probs, policy.vocab_size(), rollouts[i], w, grad);
  }
  return grad;
}

GroupAdvantage grpo_advantages(std::span<const double> rewards, double delta) {
  if (rewards.size() < 2) throw std::invalid_argument("grpo_advantages: need a group of at least 2");
  if (!(delta >= 0.0)) throw std::invalid_argument("grpo_advantages: delta must be >= 0");
  GroupAdvantage adv;
  adv.rewards.assign(rewards.begin(), rewards.end());
  adv.delta = delta;
  const double n = static_cast<double>(rewards.size());
  double s = 0.0;
  for (double r : rewards) s += r;
  adv.mean = s / n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - adv.mean) * (r - adv.mean);
  adv.std = std::sqrt(ss / n);
  adv.whitened.reserve(rewards.size());
  const double scale = adv.std + delta;
  for (double r : rewards) {
    const double centered = r - adv.mean;
    adv.whitened.push_back(centered == 0.0 ? 0.0 : centered / scale);
  }
  return adv;
}

namespace {

struct TermEval {
  double ratio;
  bool clipped;
};

TermEval evaluate_term(double log_ratio, double advantage, double eps) {
  const double ratio = std::exp(log_ratio);
  bool clipped = false;
  if (advantage > 0.0)
    clipped = ratio > 1.0 + eps;
  else if (advantage < 0.0)
    clipped = ratio < 1.0 - eps;
  return {ratio, clipped};
}

void check_group(const PolicyParams& current, const PolicyParams& old, std::span<const TokenSeq> rollouts,
                 std::span<const double> advantages) {
  if (current.vocab_size() != old.vocab_size() || current.seq_len() != old.seq_len())
    throw std::invalid_argument("grpo: current/old policy shape mismatch");
  if (rollouts.size() != advantages.size()) throw std::invalid_argument("grpo: rollouts/advantages size mismatch");
  if (rollouts.empty()) throw std::invalid_argument("grpo: empty group");
}

}  // namespace

double grpo_surrogate(const PolicyParams& current, const PolicyParams& old, std::span<const TokenSeq> rollouts,
                      std::span<const double> advantages, double clip_epsilon) {
  check_group(current, old, rollouts, advantages);
  double total = 0.0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const double a = advantages[i];
    const double ratio = std::exp(log_prob(current, rollouts[i]) - log_prob(old, rollouts[i]));
    const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
    total += std::min(ratio * a, clipped * a);
  }
  return total / static_cast<double>(rollouts.size());
}

GrpoGradient grpo_grad(const PolicyParams& current, const PolicyParams& old, std::span<const TokenSeq> rollouts,
                       std::span<const double> advantages, double clip_epsilon) {
  check_group(current, old, rollouts, advantages);
  GrpoGradient out;
  out.gradient.assign(current.dim(), 0.0);
  const auto probs = current.probabilities();
  const double inv_n = 1.0 / static_cast<double>(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    ++out.clip.total;
    const double a = advantages[i];
    if (a == 0.0) continue;
    const TermEval term = evaluate_term(log_prob(current, rollouts[i]) - log_prob(old, rollouts[i]), a, clip_epsilon);
    if (term.clipped) {
      ++out.clip.clipped;
      continue;
    }
    accumulate_score(probs, current.vocab_size(), rollouts[i], a * term.ratio * inv_n, out.gradient);
  }
  return out;
}

double kl_penalty_value(const PolicyParams& current, const PolicyParams& reference,
                        std::span<const TokenSeq> rollouts, double coef) {
  if (rollouts.empty()) return 0.0;
  double total = 0.0;
  for (const auto& y : rollouts) {
    const double lr = log_prob(current, y) - log_prob(reference, y);
    total += 0.5 * lr * lr;
  }
  return coef * total / static_cast<double>(rollouts.size());
}

void accumulate_kl_penalty_grad(const PolicyParams& current, const PolicyParams& reference,
                                std::span<const TokenSeq> rollouts, double coef, std::span<double> out) {
  if (rollouts.empty() || coef == 0.0) return;
  const auto probs = current.probabilities();
  const double inv_n = 1.0 / static_cast<double>(rollouts.size());
  for (const auto& y : rollouts) {
    const double lr = log_prob(current, y) - log_prob(reference, y);
    if (lr != 0.0) accumulate_score(probs, current.vocab_size(), y, -coef * lr * inv_n, out);
  }
}

void apply_update(PolicyParams& policy, std::span<const double> grad, double eta) {
  if (grad.size() != policy.dim()) throw std::invalid_argument("apply_update: gradient shape mismatch");
  if (!std::isfinite(eta)) throw std::invalid_argument("apply_update: non-finite step size");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw std::invalid_argument("apply_update: non-finite gradient entry at index " + std::to_string(i));
  if (eta == 0.0) return;
  auto logits = policy.logits();
  for (std::size_t i = 0; i < grad.size(); ++i) logits[i] += eta * grad[i];
  for (double l : logits)
    if (!std::isfinite(l)) throw std::invalid_argument("apply_update: update produced a non-finite logit");
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace vas
