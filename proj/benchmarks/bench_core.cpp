// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "vas/diversity.hpp"
#include "vas/policy.hpp"
#include "vas/sampler.hpp"
#include "vas/vps.hpp"

namespace {

using namespace vas;

PolicyParams bench_policy(int V, int T) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> logits(static_cast<std::size_t>(V * T));
  for (auto& x : logits) x = n(rng);
  return PolicyParams(V, T, logits);
}

void BM_SampleRollouts(benchmark::State& state) {
  const PolicyParams p = bench_policy(8, 6);
  Prompt prompt;
  prompt.answer_space_size = 8;
  Rng rng(2);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_rollouts(p, prompt, n, rng));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SampleRollouts)->Arg(8)->Arg(32)->Arg(256);

void BM_SelfBleu(benchmark::State& state) {
  const PolicyParams p = bench_policy(8, 6);
  Rng rng(3);
  const auto rollouts = sample(p, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(self_bleu(rollouts, 3));
}
BENCHMARK(BM_SelfBleu)->Arg(8)->Arg(32);

void BM_TdsUstat(benchmark::State& state) {
  const PolicyParams p = bench_policy(8, 6);
  Rng rng(4);
  const auto rollouts = sample(p, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(tds_ustat(rollouts));
}
BENCHMARK(BM_TdsUstat)->Arg(32)->Arg(256);

void BM_EnumerateExact(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const PolicyParams p = bench_policy(4, T);
  Prompt prompt;
  prompt.answer_space_size = 4;
  prompt.verifier_noise = 0.1;
  const EnumerationOptions opts{1'000'000, state.range(1) != 0};
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_exact(p, prompt, opts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(trajectory_count(4, T)));
}
BENCHMARK(BM_EnumerateExact)->Args({4, 0})->Args({4, 1})->Args({6, 0});

void BM_DrawBatch(benchmark::State& state) {
  VpsTable table;
  Rng rng(5);
  for (int i = 0; i < state.range(0); ++i) {
    VpsRecord r;
    r.prompt_id = i;
    r.vps = uniform01(rng) * 0.4;
    table.records.push_back(r);
  }
  const SamplerConfig cfg{32, 0.5, 0};
  for (auto _ : state) benchmark::DoNotOptimize(draw_batch(table, cfg, rng));
}
BENCHMARK(BM_DrawBatch)->Arg(200)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
