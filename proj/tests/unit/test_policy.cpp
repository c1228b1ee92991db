// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "vas/policy.hpp"

namespace {

using namespace vas;

PolicyParams random_policy(int V, int T, double scale, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> logits(static_cast<std::size_t>(V * T));
  for (auto& x : logits) x = n(rng);
  return PolicyParams(V, T, logits);
}

oracle::Seq to_seq(const TokenSeq& t) { return oracle::Seq(t.begin(), t.end()); }

TEST(Policy, ShapeChecks) {
  EXPECT_THROW(PolicyParams(1, 3), std::invalid_argument);
  EXPECT_THROW(PolicyParams(3, 2, std::vector<double>(5, 0.0)), std::invalid_argument);
  const PolicyParams p(3, 2);
  EXPECT_EQ(p.dim(), 6u);
}

TEST(Policy, LogProbMatchesOracleSoftmax) {
  const PolicyParams p = random_policy(4, 3, 2.0, 1);
  std::vector<double> lg(p.logits().begin(), p.logits().end());
  for (std::uint64_t c = 0; c < 64; ++c) {
    const auto y = oracle::decode(c, 4, 3);
    double lp = 0.0;
    for (int t = 0; t < 3; ++t)
      lp += std::log(oracle::softmax(std::vector<double>(lg.begin() + t * 4, lg.begin() + t * 4 + 4))[y[t]]);
    EXPECT_NEAR(log_prob(p, TokenSeq(y.begin(), y.end())), lp, 1e-12);
  }
}

TEST(Policy, LogProbStableForLargeLogits) {
  PolicyParams p(3, 1, {800.0, 0.0, -800.0});
  EXPECT_NEAR(log_prob(p, TokenSeq{0}), 0.0, 1e-12);
  EXPECT_NEAR(log_prob(p, TokenSeq{1}), -800.0, 1e-9);
  EXPECT_TRUE(std::isfinite(log_prob(p, TokenSeq{2})));
}

TEST(Policy, ScoreMatchesFiniteDifference) {
  const PolicyParams p = random_policy(3, 4, 1.0, 2);
  const TokenSeq y{2, 0, 1, 1};
  const auto g = score(p, y);
  auto f = [&](const std::vector<double>& x) { return log_prob(PolicyParams(3, 4, x), y); };
  std::vector<double> x(p.logits().begin(), p.logits().end());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(g[i], oracle::central_difference(f, x, i, 1e-5), 1e-8);
}

TEST(Policy, EnumerationMatchesOracle) {
  const PolicyParams p = random_policy(3, 4, 1.5, 3);
  Prompt prompt;
  prompt.answer_space_size = 4;
  prompt.target_answer = 2;
  prompt.verifier_noise = 0.1;
  const ExactStats s = enumerate_exact(p, prompt);
  const auto o = oracle::enumerate(std::vector<double>(p.logits().begin(), p.logits().end()), 3, 4, 4, 2, 0.1);
  EXPECT_NEAR(s.total_probability, 1.0, 1e-12);
  EXPECT_NEAR(s.pass_rate, o.pass_rate, 1e-12);
  EXPECT_NEAR(s.reward_variance, s.second_moment - s.pass_rate * s.pass_rate, 1e-15);
  for (std::size_t i = 0; i < p.dim(); ++i) {
    EXPECT_NEAR(s.true_gradient[i], o.gradient[i], 1e-12);
    EXPECT_NEAR(s.mean_score[i], 0.0, 1e-12);
  }
  EXPECT_NEAR(exact_pass_rate(p, prompt), o.pass_rate, 1e-12);
}

TEST(Policy, FisherIsSymmetricPsdWithShiftNullspace) {
  const PolicyParams p = random_policy(3, 2, 1.0, 4);
  Prompt prompt;
  prompt.answer_space_size = 2;
  const ExactStats s = enumerate_exact(p, prompt);
  const std::size_t d = p.dim();
  ASSERT_EQ(s.fisher.size(), d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(s.fisher[i * d + j], s.fisher[j * d + i], 1e-15);
  // Adding a constant to one position's logits leaves the policy unchanged.
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 3; ++j) row += s.fisher[i * d + j];
    EXPECT_NEAR(row, 0.0, 1e-14);
  }
}

TEST(Policy, EnumerationCapIsEnforced) {
  const PolicyParams p(4, 5);
  Prompt prompt;
  EXPECT_THROW(enumerate_exact(p, prompt, EnumerationOptions{100, false}), EnumerationLimitError);
  EXPECT_EQ(trajectory_count(4, 5), 1024u);
  EXPECT_EQ(trajectory_count(10, 40), UINT64_MAX);
}

TEST(Policy, TrajectoryOrderIsLexicographic) {
  const PolicyParams p(2, 3);
  std::vector<TokenSeq> seen;
  for_each_trajectory(p, 100, [&](std::span<const Token> t, double pi) {
    seen.emplace_back(t.begin(), t.end());
    EXPECT_NEAR(pi, 0.125, 1e-15);
  });
  ASSERT_EQ(seen.size(), 8u);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(to_seq(seen[c]), oracle::decode(c, 2, 3));
}

TEST(Policy, SampleFrequenciesMatchProbabilities) {
  const PolicyParams p(3, 1, {0.0, 1.0, 2.0});
  Rng rng(9);
  std::map<Token, int> counts;
  const int n = 60000;
  for (const auto& y : sample(p, n, rng)) ++counts[y[0]];
  const auto probs = p.probabilities();
  for (int v = 0; v < 3; ++v) {
    const double sd = std::sqrt(probs[v] * (1 - probs[v]) / n);
    EXPECT_NEAR(counts[v] / static_cast<double>(n), probs[v], 4 * sd);
  }
}

TEST(Policy, ConcentratedPolicyIsDegenerate) {
  const TokenSeq y{1, 0, 2};
  const PolicyParams p = concentrated_policy(3, y, 1000.0);
  Rng rng(1);
  for (const auto& s : sample(p, 100, rng)) EXPECT_EQ(s, y);
  EXPECT_NEAR(log_prob(p, y), 0.0, 1e-300);
}

TEST(Policy, InitPolicyAnchorsBiasSign) {
  // Negative bias anchors a correct chain, positive bias a wrong one.
  Corpus corpus;
  corpus.vocab_size = 4;
  corpus.seq_len = 3;
  for (int i = 0; i < 40; ++i) {
    Prompt p;
    p.id = i;
    p.answer_space_size = 5;
    p.target_answer = i % 5;
    p.difficulty_bias = (i % 2 == 0) ? -30.0 : 30.0;
    corpus.prompts.push_back(p);
  }
  const PolicySet policies = init_policy(corpus, 0.1, 17);
  ASSERT_EQ(policies.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double pass = exact_pass_rate(policies[i], corpus.prompts[i]);
    if (corpus.prompts[i].difficulty_bias < 0) EXPECT_GT(pass, 0.99) << i;
    else EXPECT_LT(pass, 0.01) << i;
  }
  EXPECT_EQ(init_policy(corpus, 0.1, 17), policies);
}

TEST(Policy, InitPolicyRejectsUnreachableTargets) {
  // Sums of two binary tokens reach 0..2 only, so target 3 of A=4 has no correct chain
  // to anchor. A wrong anchor (bias >= 0) still exists.
  Corpus corpus;
  corpus.vocab_size = 2;
  corpus.seq_len = 2;
  Prompt p;
  p.answer_space_size = 4;
  p.target_answer = 3;
  p.difficulty_bias = -1.0;
  corpus.prompts.push_back(p);
  EXPECT_THROW(init_policy(corpus, 1.0, 0), std::invalid_argument);
  corpus.prompts[0].difficulty_bias = 1.0;
  EXPECT_EQ(exact_pass_rate(init_policy(corpus, 1.0, 0)[0], corpus.prompts[0]), 0.0);
}

}  // namespace
