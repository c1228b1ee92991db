// SPDX-License-Identifier: Apache-2.0
#include "vas/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vas {

void SamplerConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("SamplerConfig: batch_size must be >= 1");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw std::invalid_argument("SamplerConfig: mix_ratio outside [0, 1]");
}

int SamplerConfig::weighted_slots() const {
  return static_cast<int>(std::floor(mix_ratio * static_cast<double>(batch_size)));
}

namespace {

double vps_total(const VpsTable& table) {
  double total = 0.0;
  for (const auto& r : table.records) total += std::max(0.0, r.vps);
  return total;
}

}  // namespace

Batch draw_batch(const VpsTable& table, const SamplerConfig& config, Rng& rng) {
  config.validate();
  if (table.records.empty()) throw std::invalid_argument("draw_batch: empty VPS table");
  const std::size_t n = table.records.size();
  const int b_w = config.weighted_slots();
  const int b_r = config.batch_size - b_w;

  Batch batch;
  batch.prompt_ids.reserve(static_cast<std::size_t>(config.batch_size));
  batch.prompt_indices.reserve(static_cast<std::size_t>(config.batch_size));
  batch.portions.reserve(static_cast<std::size_t>(config.batch_size));
  auto push = [&](std::size_t idx, Portion portion) {
    batch.prompt_indices.push_back(idx);
    batch.prompt_ids.push_back(table.records[idx].prompt_id);
    batch.portions.push_back(portion);
  };

  if (b_w > 0) {
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += std::max(0.0, table.records[i].vps);
      cdf[i] = acc;
    }
    if (acc <= 0.0) {
      batch.weighted_fallback = true;
      for (int s = 0; s < b_w; ++s) push(uniform_index(rng, n), Portion::weighted);
    } else {
      for (int s = 0; s < b_w; ++s) {
        const double u = uniform01(rng) * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        auto idx = static_cast<std::size_t>(it - cdf.begin());
        if (idx >= n) idx = n - 1;
        push(idx, Portion::weighted);
      }
    }
  }
  for (int s = 0; s < b_r; ++s) push(uniform_index(rng, n), Portion::uniform);
  return batch;
}

double selection_probability(const VpsTable& table, const SamplerConfig& config, PromptId prompt_id) {
  config.validate();
  const auto it = std::find_if(table.records.begin(), table.records.end(),
                               [&](const VpsRecord& r) { return r.prompt_id == prompt_id; });
  if (it == table.records.end()) throw std::invalid_argument("selection_probability: prompt not in table");
  const double n = static_cast<double>(table.records.size());
  const double w = static_cast<double>(config.weighted_slots()) / static_cast<double>(config.batch_size);
  const double total = vps_total(table);
  const double weighted = total > 0.0 ? std::max(0.0, it->vps) / total : 1.0 / n;
  return w * weighted + (1.0 - w) / n;
}

}  // namespace vas
