// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "vas/analytics.hpp"
#include "vas/persist.hpp"

namespace {

using namespace vas;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vas_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<StepRecord> random_records(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<StepRecord> out;
  for (int i = 0; i < n; ++i) {
    StepRecord r;
    r.step = i + 1;
    r.grad_norm = uniform01(rng) * std::pow(10.0, static_cast<double>(uniform_index(rng, 12)) - 6.0);
    r.clip_fraction = uniform01(rng);
    r.batch_mean_reward = uniform01(rng);
    if (i % 3 == 0) r.val_acc = uniform01(rng);
    out.push_back(r);
  }
  return out;
}

TEST(Analytics, CsvRoundTripIsExact) {
  const auto records = random_records(1000, 1);
  const std::string csv = run_log_to_csv(records);
  const auto back = parse_run_log_csv(csv);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(back[i], records[i]) << i;
  EXPECT_EQ(run_log_to_csv(back), csv);
}

TEST(Analytics, CsvParserRejectsMalformedInput) {
  EXPECT_THROW(parse_run_log_csv("step,grad\n1,2\n"), std::invalid_argument);
  const std::string h = std::string(kRunLogHeader) + "\n";
  EXPECT_THROW(parse_run_log_csv(h + "1,0.5,0,0.5\n"), std::invalid_argument);
  EXPECT_THROW(parse_run_log_csv(h + "1,abc,0,0.5,\n"), std::invalid_argument);
  EXPECT_THROW(parse_run_log_csv(h + "2,1,0,0.5,\n1,1,0,0.5,\n"), std::invalid_argument);
  EXPECT_EQ(parse_run_log_csv(h + "1,1,0,0.5,\n").size(), 1u);
}

TEST(Analytics, RunLogFlushesAndValidates) {
  const fs::path dir = scratch("runlog");
  RunLog log(dir / "run_log.csv");
  const auto records = random_records(5, 2);
  for (const auto& r : records) log.record_step(r);
  EXPECT_EQ(parse_run_log_csv(read_text_file(dir / "run_log.csv")), records);
  StepRecord dup = records.back();
  EXPECT_THROW(log.record_step(dup), std::invalid_argument);
  StepRecord bad;
  bad.step = 100;
  bad.clip_fraction = 1.5;
  EXPECT_THROW(log.record_step(bad), std::invalid_argument);
  bad.clip_fraction = 0.0;
  bad.val_acc = -0.1;
  EXPECT_THROW(log.record_step(bad), std::invalid_argument);
}

TEST(Analytics, HistogramMatchesRecount) {
  Rng rng(3);
  std::vector<VpsRecord> records;
  std::vector<double> values;
  for (int i = 0; i < 500; ++i) {
    VpsRecord r;
    r.prompt_id = i;
    r.vps = uniform01(rng) * 0.4;
    records.push_back(r);
    values.push_back(r.vps);
  }
  records.push_back(VpsRecord{999, 0, 0, 0, 0.4, 0, 0});  // upper edge lands in the last bin
  values.push_back(0.4);
  const Histogram h = vps_histogram(records, 10, 0.0, 0.4);
  EXPECT_EQ(h.total(), 501);
  EXPECT_EQ(h.counts, oracle::recount(values, h.edges));
  EXPECT_EQ(vps_histogram(VpsSnapshot{0, records}, 10, VpsWeights{0.8, 0.2}).counts, h.counts);
  EXPECT_EQ(bin_index(-1.0, 0.0, 1.0, 4), 0);
  EXPECT_EQ(bin_index(2.0, 0.0, 1.0, 4), 3);
}

TEST(Analytics, TransitionMatrixCountsPairs) {
  VpsSnapshot a{0, {}}, b{7, {}};
  // Prompt order differs between snapshots; pairing is by id.
  const std::vector<std::pair<double, double>> moves{{0.05, 0.05}, {0.15, 0.35}, {0.35, 0.05}, {0.25, 0.25}};
  for (std::size_t i = 0; i < moves.size(); ++i) {
    a.records.push_back(VpsRecord{static_cast<PromptId>(i), 0, 0, 0, moves[i].first, 0, 0});
    b.records.insert(b.records.begin(), VpsRecord{static_cast<PromptId>(i), 0, 0, 0, moves[i].second, 0, 0});
  }
  const TransitionMatrix m = transition_matrix(a, b, 4, 0.0, 0.4);
  EXPECT_EQ(m.total(), 4);
  EXPECT_EQ(m.counts[0][0], 1);
  EXPECT_EQ(m.counts[1][3], 1);
  EXPECT_EQ(m.counts[3][0], 1);
  EXPECT_EQ(m.counts[2][2], 1);
  EXPECT_DOUBLE_EQ(m.diagonal_fraction(), 0.5);
  EXPECT_EQ(m.from_step, 0);
  EXPECT_EQ(m.to_step, 7);
  b.records.pop_back();
  EXPECT_THROW(transition_matrix(a, b, 4, 0.0, 0.4), std::invalid_argument);
}

TEST(Persist, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Persist, ManifestListsFiles) {
  const fs::path dir = scratch("manifest");
  write_text_file(dir / "a.txt", "abc");
  write_text_file(dir / "b.txt", "");
  write_manifest(dir, {"a.txt", "b.txt"});
  const auto j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  ASSERT_EQ(j["files"].size(), 2u);
  EXPECT_EQ(j["files"][0]["name"], "a.txt");
  EXPECT_EQ(j["files"][0]["bytes"], 3);
  EXPECT_EQ(j["files"][0]["sha256"], sha256_hex("abc"));
  EXPECT_THROW(write_manifest(dir, {"missing.txt"}), std::exception);
}

TEST(Persist, CheckpointRoundTrip) {
  Checkpoint ck;
  ck.step = 42;
  ck.policies.emplace_back(3, 2, std::vector<double>{0.1, -0.2, 1e-17, 3.5, 1.0 / 3.0, -7.0});
  ck.vps_records.push_back(VpsRecord{5, 0.375, 0.234375, 0.61, 0.31, 35, 32});
  Rng rng(9);
  rng();
  ck.rng_states["sampler"] = save_state(rng);
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(ck));
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(back.policies, ck.policies);
  EXPECT_EQ(back.vps_records, ck.vps_records);
  EXPECT_EQ(back.rng_states, ck.rng_states);
  EXPECT_THROW(checkpoint_from_json("{\"step\": 1}"), std::invalid_argument);
  EXPECT_THROW(checkpoint_from_json("not json"), std::invalid_argument);
}

}  // namespace
