// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>

#include "vas/policy.hpp"
#include "vas/sampler.hpp"
#include "vas/vps.hpp"

namespace {

using namespace vas;

VpsTable table_from(const std::vector<double>& vps_values) {
  VpsTable t;
  for (std::size_t i = 0; i < vps_values.size(); ++i) {
    VpsRecord r;
    r.prompt_id = static_cast<PromptId>(100 + i);
    r.vps = vps_values[i];
    t.records.push_back(r);
  }
  return t;
}

TEST(Vps, ScoresAndWeights) {
  EXPECT_DOUBLE_EQ(ovs(0.5), 0.25);
  EXPECT_DOUBLE_EQ(ovs(0.0), 0.0);
  EXPECT_DOUBLE_EQ(ovs(1.0), 0.0);
  EXPECT_THROW(ovs(1.5), std::invalid_argument);
  const std::vector<int> rewards{1, 0, 1, 1};
  EXPECT_DOUBLE_EQ(pass_rate(rewards), 0.75);
  EXPECT_DOUBLE_EQ(compute_vps(0.2, 0.5, VpsWeights{0.8, 0.2}), 0.8 * 0.2 + 0.2 * 0.5);
  EXPECT_DOUBLE_EQ(VpsWeights{}.max_vps(), 0.4);
  EXPECT_NO_THROW((VpsWeights{0.0, 1.0}.validate()));
  EXPECT_NO_THROW((VpsWeights{1.0, 0.0}.validate()));
  EXPECT_THROW((VpsWeights{0.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((VpsWeights{-0.1, 1.0}.validate()), std::invalid_argument);
}

TEST(Vps, RefreshProducesValidRecords) {
  Corpus corpus = generate_corpus(30, 4, 3, 4, DifficultySpec{-3.0, 3.0, 0.0}, 5);
  const PolicySet policies = init_policy(corpus, 1.0, 6);
  VpsTable empty;
  empty.weights = VpsWeights{0.5, 0.5};
  Rng rng(7);
  const VpsTable t = refresh_all(empty, policies, corpus, 16, 35, rng);
  ASSERT_EQ(t.size(), corpus.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(check_record(t.records[i], t.weights), "") << i;
    EXPECT_EQ(t.records[i].prompt_id, corpus.prompts[i].id);
    EXPECT_EQ(t.records[i].last_refresh_step, 35);
    EXPECT_EQ(t.records[i].n_rollouts_used, 16);
  }
  VpsRecord bad = t.records[0];
  bad.vps += 0.1;
  EXPECT_NE(check_record(bad, t.weights), "");
}

TEST(Vps, SnapshotJsonlRoundTrip) {
  Corpus corpus = generate_corpus(12, 3, 3, 3, DifficultySpec{-1.0, 1.0, 0.0}, 1);
  const PolicySet policies = init_policy(corpus, 1.0, 1);
  Rng rng(2);
  const VpsTable t0 = refresh_all(VpsTable{}, policies, corpus, 8, 0, rng);
  const VpsTable t1 = refresh_all(t0, policies, corpus, 8, 7, rng);
  const auto snaps = parse_snapshots(snapshot_jsonl(t0, 0) + snapshot_jsonl(t1, 7));
  ASSERT_EQ(snaps.size(), 2u);
  EXPECT_EQ(snaps[1].step, 7);
  for (std::size_t i = 0; i < t1.size(); ++i) {
    EXPECT_EQ(snaps[1].records[i].prompt_id, t1.records[i].prompt_id);
    EXPECT_EQ(snaps[1].records[i].vps, t1.records[i].vps);
    EXPECT_EQ(snaps[1].records[i].pass_rate, t1.records[i].pass_rate);
  }
}

TEST(Sampler, WeightedSlotsFloor) {
  EXPECT_EQ((SamplerConfig{10, 0.3, 0}.weighted_slots()), 3);
  EXPECT_EQ((SamplerConfig{10, 0.35, 0}.weighted_slots()), 3);
  EXPECT_EQ((SamplerConfig{32, 1.0, 0}.weighted_slots()), 32);
  EXPECT_THROW((SamplerConfig{0, 0.5, 0}.validate()), std::invalid_argument);
  EXPECT_THROW((SamplerConfig{8, 1.5, 0}.validate()), std::invalid_argument);
}

TEST(Sampler, BatchLayoutAndDeterminism) {
  const VpsTable t = table_from({0.1, 0.0, 0.3, 0.2});
  const SamplerConfig cfg{10, 0.5, 0};
  Rng a(3), b(3);
  const Batch x = draw_batch(t, cfg, a);
  const Batch y = draw_batch(t, cfg, b);
  EXPECT_EQ(x.prompt_ids, y.prompt_ids);
  ASSERT_EQ(x.prompt_ids.size(), 10u);
  for (std::size_t s = 0; s < 10; ++s) {
    EXPECT_EQ(x.portions[s], s < 5 ? Portion::weighted : Portion::uniform);
    EXPECT_EQ(x.prompt_ids[s], t.records[x.prompt_indices[s]].prompt_id);
    if (s < 5) {
      EXPECT_NE(x.prompt_ids[s], 101);  // zero VPS is never drawn by weight
    }
  }
  EXPECT_FALSE(x.weighted_fallback);
}

TEST(Sampler, AllZeroVpsFallsBackToUniform) {
  const VpsTable t = table_from({0.0, 0.0, 0.0});
  Rng rng(4);
  const Batch b = draw_batch(t, SamplerConfig{6, 1.0, 0}, rng);
  EXPECT_TRUE(b.weighted_fallback);
  EXPECT_DOUBLE_EQ(selection_probability(t, SamplerConfig{6, 1.0, 0}, 100), 1.0 / 3.0);
}

TEST(Sampler, SelectionProbabilityClosedForm) {
  const VpsTable t = table_from({0.1, 0.0, 0.3, 0.2});
  for (double lambda : {0.0, 0.3, 0.5, 1.0}) {
    const SamplerConfig cfg{10, lambda, 0};
    double sum = 0.0;
    for (const auto& r : t.records) sum += selection_probability(t, cfg, r.prompt_id);
    EXPECT_NEAR(sum, 1.0, 1e-15);
    const double w = std::floor(lambda * 10) / 10;
    EXPECT_NEAR(selection_probability(t, cfg, 102), w * 0.5 + (1 - w) / 4, 1e-15);
  }
  EXPECT_THROW(selection_probability(t, SamplerConfig{10, 0.5, 0}, 999), std::invalid_argument);
}

}  // namespace
