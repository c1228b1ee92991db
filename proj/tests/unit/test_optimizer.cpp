// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "vas/optimizer.hpp"

namespace {

using namespace vas;

PolicyParams random_policy(int V, int T, double scale, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> logits(static_cast<std::size_t>(V * T));
  for (auto& x : logits) x = n(rng);
  return PolicyParams(V, T, logits);
}

TEST(Optimizer, ReinforceMatchesManualSum) {
  const PolicyParams p = random_policy(3, 2, 1.0, 1);
  const std::vector<TokenSeq> ys{{0, 1}, {2, 2}, {1, 0}};
  const std::vector<double> rs{1.0, 0.0, 1.0};
  for (auto mode : {BaselineMode::none, BaselineMode::mean, BaselineMode::optimal}) {
    const Baseline b{mode, 0.3};
    const double bv = mode == BaselineMode::none ? 0.0 : mode == BaselineMode::mean ? 2.0 / 3.0 : 0.3;
    const auto g = reinforce_grad(p, ys, rs, b);
    std::vector<double> expect(p.dim(), 0.0);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const auto s = score(p, ys[i]);
      for (std::size_t k = 0; k < s.size(); ++k) expect[k] += s[k] * (rs[i] - bv) / 3.0;
    }
    for (std::size_t k = 0; k < expect.size(); ++k) EXPECT_NEAR(g[k], expect[k], 1e-15);
  }
}

TEST(Optimizer, AdvantagesAreWhitened) {
  const std::vector<double> rs{1, 0, 0, 1, 1, 1, 0, 1};
  const auto a = grpo_advantages(rs, 1e-4);
  EXPECT_DOUBLE_EQ(a.mean, 0.625);
  EXPECT_NEAR(a.std, std::sqrt(0.625 * 0.375), 1e-15);
  double sum = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_NEAR(a.whitened[i], (rs[i] - 0.625) / (a.std + 1e-4), 1e-15);
    sum += a.whitened[i];
  }
  EXPECT_NEAR(sum, 0.0, 1e-14);
}

TEST(Optimizer, UniformRewardsGiveExactlyZero) {
  const PolicyParams p = random_policy(4, 3, 1.0, 2);
  const std::vector<TokenSeq> ys{{0, 1, 2}, {3, 3, 3}, {1, 0, 2}, {2, 2, 0}};
  for (double r : {0.0, 1.0}) {
    const std::vector<double> rs(4, r);
    const auto a = grpo_advantages(rs, 1e-4);
    for (double x : a.whitened) EXPECT_EQ(x, 0.0);
    const auto g = grpo_grad(p, p, ys, a.whitened, 0.2);
    for (double x : g.gradient) EXPECT_EQ(x, 0.0);
    EXPECT_EQ(g.clip.clipped, 0u);
    EXPECT_EQ(g.clip.total, 4u);
  }
}

TEST(Optimizer, GrpoGradientMatchesFiniteDifference) {
  const PolicyParams old = random_policy(3, 3, 1.0, 3);
  const std::vector<TokenSeq> ys{{0, 1, 2}, {2, 2, 1}, {1, 0, 0}, {0, 0, 0}};
  const auto a = grpo_advantages(std::vector<double>{1, 0, 1, 0}, 1e-4);
  // Small perturbation keeps every ratio strictly inside or outside the clip band.
  for (double shift : {0.0, 0.05, 0.8}) {
    PolicyParams cur = old;
    for (auto& x : cur.logits()) x += shift * std::sin(7.0 * x);
    const auto g = grpo_grad(cur, old, ys, a.whitened, 0.2);
    auto f = [&](const std::vector<double>& x) {
      return grpo_surrogate(PolicyParams(3, 3, x), old, ys, a.whitened, 0.2);
    };
    std::vector<double> x(cur.logits().begin(), cur.logits().end());
    for (std::size_t i = 0; i < x.size(); ++i)
      EXPECT_NEAR(g.gradient[i], oracle::central_difference(f, x, i, 1e-6), 1e-6) << shift << " " << i;
  }
}

TEST(Optimizer, OnPolicyGrpoEqualsWhitenedReinforce) {
  const PolicyParams p = random_policy(3, 2, 1.0, 4);
  const std::vector<TokenSeq> ys{{0, 1}, {2, 2}, {1, 0}, {1, 1}};
  const std::vector<double> rs{1, 0, 0, 1};
  const auto a = grpo_advantages(rs, 1e-4);
  const auto g = grpo_grad(p, p, ys, a.whitened, 0.2);
  EXPECT_EQ(g.clip.clipped, 0u);
  const auto r = reinforce_grad(p, ys, a.whitened, Baseline{BaselineMode::none, 0.0});
  for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(g.gradient[k], r[k], 1e-15);
}

TEST(Optimizer, ClipCountsFollowAdvantageSign) {
  PolicyParams old(2, 1, {0.0, 0.0});
  PolicyParams cur(2, 1, {1.0, -1.0});  // ratio for token 0 > 1.2, token 1 < 0.8
  const std::vector<TokenSeq> ys{{0}, {0}, {1}, {1}};
  const std::vector<double> adv{1.0, -1.0, 1.0, -1.0};
  const auto g = grpo_grad(cur, old, ys, adv, 0.2);
  EXPECT_EQ(g.clip.total, 4u);
  EXPECT_EQ(g.clip.clipped, 2u);  // (token 0, A>0) and (token 1, A<0)
  EXPECT_DOUBLE_EQ(g.clip.fraction(), 0.5);
}

TEST(Optimizer, KlPenaltyGradientMatchesFiniteDifference) {
  const PolicyParams ref = random_policy(3, 2, 1.0, 5);
  PolicyParams cur = ref;
  for (auto& x : cur.logits()) x += 0.3;
  cur.logit(0, 1) -= 0.7;
  const std::vector<TokenSeq> ys{{0, 1}, {2, 0}, {1, 1}};
  EXPECT_NEAR(kl_penalty_value(ref, ref, ys, 0.01), 0.0, 1e-18);
  std::vector<double> g(cur.dim(), 0.0);
  accumulate_kl_penalty_grad(cur, ref, ys, 0.01, g);
  auto f = [&](const std::vector<double>& x) { return -kl_penalty_value(PolicyParams(3, 2, x), ref, ys, 0.01); };
  std::vector<double> x(cur.logits().begin(), cur.logits().end());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], oracle::central_difference(f, x, i, 1e-6), 1e-9);
}

TEST(Optimizer, ApplyUpdateValidates) {
  PolicyParams p(2, 2, {0.0, 0.0, 0.0, 0.0});
  apply_update(p, std::vector<double>{1, 2, 3, 4}, 0.5);
  EXPECT_EQ(p.logit(1, 1), 2.0);
  EXPECT_THROW(apply_update(p, std::vector<double>{1, 2}, 1.0), std::invalid_argument);
  EXPECT_THROW(apply_update(p, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN(), 0, 0}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(apply_update(p, std::vector<double>{1, 0, 0, 0}, std::numeric_limits<double>::infinity()),
               std::invalid_argument);
  EXPECT_DOUBLE_EQ(l2_norm(std::vector<double>{3, 4}), 5.0);
}

TEST(Optimizer, ConfigValidation) {
  UpdateConfig c;
  EXPECT_NO_THROW(c.validate());
  c.whitening_delta = -1e-4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = UpdateConfig{};
  c.clip_epsilon = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = UpdateConfig{};
  c.group_size = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_estimator("grpo"), Estimator::grpo);
  EXPECT_EQ(parse_baseline_mode(to_string(BaselineMode::optimal)), BaselineMode::optimal);
  EXPECT_THROW(parse_baseline_mode("median"), std::invalid_argument);
}

}  // namespace
