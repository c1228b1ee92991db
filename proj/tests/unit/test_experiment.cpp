// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "vas/experiment.hpp"
#include "vas/persist.hpp"

namespace {

using namespace vas;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vas_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig c = make_preset("default");
  c.n_prompts = 20;
  c.vocab_size = 4;
  c.seq_len = 3;
  c.answer_space = 4;
  c.n_rollouts = 8;
  c.batch_size = 8;
  c.t_update = 10;
  c.total_steps = 100;
  c.checkpoint_every = 25;
  return c;
}

TEST(Config, DefaultsAndPresets) {
  const ExperimentConfig d = make_preset("default");
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.n_rollouts, 32);
  EXPECT_EQ(d.mix_ratio, 0.5);
  EXPECT_EQ(d.alpha, 0.8);
  EXPECT_EQ(d.beta, 0.2);
  EXPECT_EQ(d.t_update, 35);
  const ExperimentConfig a = make_preset("ablation");
  EXPECT_EQ(a.n_rollouts, 8);
  EXPECT_EQ(a.alpha, 0.5);
  EXPECT_EQ(a.beta, 0.5);
  EXPECT_EQ(a.t_update, 28);
  EXPECT_THROW(make_preset("huge"), ConfigError);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.seed = 12345678901234ull;
  c.kl_penalty = true;
  c.diversity_metric = "edit_distance_ustat";
  const std::string text = config_to_json(c);
  EXPECT_EQ(config_to_json(config_from_json(text)), text);
  const ExperimentConfig over = config_from_json(R"({"preset": "ablation", "seed": 4})");
  EXPECT_EQ(over.n_rollouts, 8);
  EXPECT_EQ(over.seed, 4u);
}

TEST(Config, InvalidValuesRaiseConfigError) {
  EXPECT_THROW(config_from_json(R"({"whitening_delta": -0.001})").validate(), ConfigError);
  EXPECT_THROW(config_from_json(R"({"no_such_key": 1})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"n_prompts": "many"})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"n_prompts": 2.5})"), ConfigError);
  EXPECT_THROW(config_from_json("[1, 2]"), ConfigError);
  EXPECT_THROW(config_from_json("{broken"), ConfigError);
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.mix_ratio = 1.2; });
  bad([](ExperimentConfig& c) { c.alpha = 0.0, c.beta = 0.0; });
  bad([](ExperimentConfig& c) { c.t_update = 0; });
  bad([](ExperimentConfig& c) { c.answer_space = 1 << 20; });
  bad([](ExperimentConfig& c) { c.estimator = "ppo"; });
  bad([](ExperimentConfig& c) { c.diversity_metric = "rouge"; });
  bad([](ExperimentConfig& c) { c.verifier_noise = 0.7; });
  bad([](ExperimentConfig& c) { c.learning_rate = 0.0; });
}

TEST(Train, InMemoryRunsAreDeterministic) {
  const ExperimentConfig c = small_config();
  const TrainResult a = run_train(c);
  const TrainResult b = run_train(c);
  EXPECT_EQ(a.log, b.log);
  ASSERT_EQ(a.snapshots.size(), 11u);  // step 0 plus every 10 steps
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) EXPECT_EQ(a.snapshots[i].records, b.snapshots[i].records);
  EXPECT_EQ(a.final_policies, b.final_policies);
  std::int64_t draws = 0;
  for (auto n : a.selection_counts) draws += n;
  EXPECT_EQ(draws, 100 * 8);
  ExperimentConfig other = c;
  other.seed = 1;
  EXPECT_NE(run_train(other).log, a.log);
}

TEST(Train, LogFieldsAreConsistent) {
  const TrainResult r = run_train(small_config());
  ASSERT_EQ(r.log.size(), 100u);
  for (const auto& rec : r.log) {
    EXPECT_EQ(rec.clip_fraction, 0.0);  // one inner epoch: every ratio is exactly 1
    EXPECT_EQ(rec.val_acc.has_value(), rec.step % 10 == 0);
    EXPECT_GE(rec.batch_mean_reward, 0.0);
    EXPECT_LE(rec.batch_mean_reward, 1.0);
  }
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  ExperimentConfig full = small_config();
  full.output_dir = scratch("resume_full").string();
  run_train(full);

  ExperimentConfig half = small_config();
  half.output_dir = scratch("resume_half").string();
  half.total_steps = 50;
  run_train(half);
  ExperimentConfig rest = half;
  rest.total_steps = 100;
  run_train(rest, true);

  // config.json and manifest.json differ only through output_dir.
  for (const char* f : {"run_log.csv", "vps_snapshots.jsonl", "sampler_trace.csv", "checkpoint.json", "corpus.json"}) {
    EXPECT_EQ(read_text_file(fs::path(full.output_dir) / f), read_text_file(fs::path(rest.output_dir) / f)) << f;
  }
}

TEST(Train, ResumeFromMidRunCheckpointTruncatesLogs) {
  ExperimentConfig c = small_config();
  c.output_dir = scratch("resume_mid").string();
  c.total_steps = 60;
  run_train(c);
  const std::string log60 = read_text_file(fs::path(c.output_dir) / "run_log.csv");
  // The checkpoint is at step 60; resuming a finished run changes nothing.
  run_train(c, true);
  EXPECT_EQ(read_text_file(fs::path(c.output_dir) / "run_log.csv"), log60);
}

TEST(Train, ResumeRejectsChangedConfig) {
  ExperimentConfig c = small_config();
  c.output_dir = scratch("resume_changed").string();
  c.total_steps = 20;
  run_train(c);
  ExperimentConfig changed = c;
  changed.mix_ratio = 0.9;
  EXPECT_THROW(run_train(changed, true), ConfigError);
  ExperimentConfig no_dir = c;
  no_dir.output_dir.clear();
  EXPECT_THROW(run_train(no_dir, true), ConfigError);
}

TEST(Train, ManifestHashesMatchFiles) {
  ExperimentConfig c = small_config();
  c.output_dir = scratch("manifest_run").string();
  c.total_steps = 15;
  run_train(c);
  const auto m = nlohmann::json::parse(read_text_file(fs::path(c.output_dir) / "manifest.json"));
  ASSERT_EQ(m["files"].size(), 6u);
  for (const auto& f : m["files"])
    EXPECT_EQ(f["sha256"], sha256_hex(read_text_file(fs::path(c.output_dir) / f["name"].get<std::string>())));
}

TEST(Train, SolvedPoliciesGiveZeroGradient) {
  ExperimentConfig c = small_config();
  c.init_mode = "solved";
  c.total_steps = 12;
  const TrainResult r = run_train(c);
  for (const auto& rec : r.log) {
    EXPECT_EQ(rec.grad_norm, 0.0);
    EXPECT_EQ(rec.batch_mean_reward, 1.0);
  }
  EXPECT_EQ(r.weighted_fallback_steps, 12);
}

TEST(Train, HelperMetrics) {
  std::vector<StepRecord> log;
  for (int s = 1; s <= 10; ++s) {
    StepRecord r;
    r.step = s;
    r.grad_norm = s;
    if (s % 2 == 0) r.val_acc = s / 10.0;
    log.push_back(r);
  }
  EXPECT_EQ(steps_to_accuracy(log, 0.55), 6);
  EXPECT_FALSE(steps_to_accuracy(log, 1.01).has_value());
  EXPECT_DOUBLE_EQ(mean_grad_norm_first_half(log, 10), 3.0);
}

TEST(Report, WritesHistogramsAndTrends) {
  ExperimentConfig c = small_config();
  c.output_dir = scratch("report").string();
  run_train(c);
  const auto j = nlohmann::json::parse(make_report(c.output_dir, 10));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "report.json"));
  EXPECT_TRUE(j.contains("trends"));
  EXPECT_THROW(make_report(scratch("report_missing"), 10), std::exception);
}

TEST(Trends, NeedThreeSnapshots) {
  std::vector<VpsSnapshot> snaps(2);
  EXPECT_THROW(summarize_trends(snaps, VpsWeights{}, 10), std::invalid_argument);
}

TEST(Ablation, SweepsCoverEveryDimension) {
  const ExperimentConfig base = make_preset("ablation");
  EXPECT_EQ(ablation_settings(base, AblationDimension::mix_ratio).size(), 4u);
  EXPECT_EQ(ablation_settings(base, AblationDimension::update_freq).size(), 6u);
  EXPECT_EQ(ablation_settings(base, AblationDimension::n_rollouts).size(), 3u);
  const auto vr = ablation_settings(base, AblationDimension::vps_ratio);
  ASSERT_EQ(vr.size(), 5u);
  EXPECT_EQ(vr.front().alpha, 0.0);
  EXPECT_EQ(vr.back().beta, 0.0);
  EXPECT_EQ(parse_ablation_dimension("update_freq"), AblationDimension::update_freq);
  EXPECT_THROW(parse_ablation_dimension("lr"), ConfigError);
}

TEST(Ablation, RunsAndWritesTables) {
  ExperimentConfig c = small_config();
  c.total_steps = 20;
  c.ablate_seeds = 2;
  c.output_dir = scratch("ablate").string();
  const AblationTable t = run_ablate(c, AblationDimension::n_rollouts);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "ablate_n_rollouts.json"));
  EXPECT_TRUE(fs::exists(fs::path(c.output_dir) / "ablate_n_rollouts.csv"));
  for (const auto& row : t.rows) {
    EXPECT_GE(row.final_val_acc, 0.0);
    EXPECT_LE(row.final_val_acc, 1.0);
    EXPECT_GE(row.min_selection_fraction, 0.0);
  }
}

}  // namespace
