// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/rng.hpp"
#include "vas/vps.hpp"

namespace vas {

struct SamplerConfig {
  int batch_size = 32;
  double mix_ratio = 0.5;  // lambda: fraction of the batch drawn VPS-weighted
  std::uint64_t seed = 0;

  void validate() const;
  int weighted_slots() const;  // floor(lambda * B)
};

enum class Portion : std::uint8_t { weighted, uniform };

/// A training batch: weighted slots first, then uniform slots. Duplicates are kept.
struct Batch {
  std::vector<PromptId> prompt_ids;
  std::vector<std::size_t> prompt_indices;  // positions in the table / corpus
  std::vector<Portion> portions;
  bool weighted_fallback = false;  // all VPS were zero; weighted slots were drawn uniformly
};

/// floor(lambda*B) draws with replacement proportional to VPS, then B - floor(lambda*B)
/// uniform draws with replacement.
Batch draw_batch(const VpsTable& table, const SamplerConfig& config, Rng& rng);

/// Per-slot marginal probability of drawing prompt_id:
/// w * vps_i / sum(vps) + (1 - w) / |D| with w = floor(lambda*B)/B (w = lambda when lambda*B
/// is integral). Falls back to uniform when every VPS is zero.
double selection_probability(const VpsTable& table, const SamplerConfig& config, PromptId prompt_id);

}  // namespace vas
