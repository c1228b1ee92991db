// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/diversity.hpp"
#include "vas/policy.hpp"
#include "vas/rng.hpp"

namespace vas {

/// VPS = alpha * OVS + beta * TDS, both scores on their native scales
/// (OVS in [0, 0.25], TDS in [0, 1]).
struct VpsWeights {
  double alpha = 0.8;
  double beta = 0.2;

  /// Non-negative and not both zero; throws std::invalid_argument otherwise.
  void validate() const;
  /// Largest attainable VPS: alpha * 0.25 + beta * 1.
  double max_vps() const { return alpha * 0.25 + beta; }
};

struct VpsRecord {
  PromptId prompt_id = 0;
  double pass_rate = 0.0;
  double ovs = 0.0;
  double tds = 0.0;
  double vps = 0.0;
  std::int64_t last_refresh_step = 0;
  int n_rollouts_used = 0;

  bool operator==(const VpsRecord&) const = default;
};

/// Records are index-aligned with Corpus::prompts.
struct VpsTable {
  VpsWeights weights;
  DiversityConfig diversity;
  std::vector<VpsRecord> records;

  std::size_t size() const { return records.size(); }
};

double pass_rate(std::span<const int> rewards);
/// p(1 - p); throws std::invalid_argument outside [0, 1].
double ovs(double p);
double compute_vps(double ovs, double tds, const VpsWeights& weights);

/// Fresh estimate for one prompt from n_rollouts samples of the current policy.
VpsRecord estimate_record(const PolicyParams& policy, const Prompt& prompt, int n_rollouts, std::int64_t step,
                          const VpsWeights& weights, const DiversityConfig& diversity, Rng& rng);

/// Re-estimates every prompt; the input table supplies weights and diversity settings.
/// An empty input table is treated as the initial estimation. Refresh rollouts are
/// measurement only and never reach the optimizer.
VpsTable refresh_all(const VpsTable& table, const PolicySet& policies, const Corpus& corpus, int n_rollouts,
                     std::int64_t step, Rng& rng);

/// Checks the record invariants (ovs = p(1-p), vps = alpha*ovs + beta*tds, pass rate on
/// the 1/n grid, ranges). Returns an empty string when all hold.
std::string check_record(const VpsRecord& record, const VpsWeights& weights);

/// One JSON object per record: {step, prompt_id, pass_rate, ovs, tds, vps}.
std::string snapshot_jsonl(const VpsTable& table, std::int64_t step);

struct VpsSnapshot {
  std::int64_t step = 0;
  std::vector<VpsRecord> records;  // only prompt_id, pass_rate, ovs, tds, vps are populated
};

/// Groups a vps_snapshots.jsonl stream by step, in file order.
std::vector<VpsSnapshot> parse_snapshots(const std::string& jsonl);

}  // namespace vas
