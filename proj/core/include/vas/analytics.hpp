// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vas/corpus.hpp"
#include "vas/policy.hpp"
#include "vas/rng.hpp"
#include "vas/vps.hpp"

namespace vas {

struct StepRecord {
  std::int64_t step = 0;
  double grad_norm = 0.0;
  double clip_fraction = 0.0;
  double batch_mean_reward = 0.0;
  std::optional<double> val_acc;

  bool operator==(const StepRecord&) const = default;
};

inline constexpr const char* kRunLogHeader = "step,grad_norm,clip_fraction,batch_mean_reward,val_acc";

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

std::string format_step_record(const StepRecord& record);
std::string run_log_to_csv(std::span<const StepRecord> records);
/// Throws std::invalid_argument on a bad header, malformed rows or out-of-order steps.
std::vector<StepRecord> parse_run_log_csv(const std::string& text);

/// Append-only metrics log. When bound to a file, every record is flushed as it arrives.
class RunLog {
 public:
  RunLog() = default;
  /// Truncates path, writes the header and then any prior records (used when resuming).
  explicit RunLog(const std::filesystem::path& path, std::span<const StepRecord> prior = {});

  /// Rejects steps that do not strictly increase and out-of-range metrics.
  void record_step(const StepRecord& record);

  const std::vector<StepRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::vector<StepRecord> records_;
  std::ofstream out_;
};

struct Histogram {
  std::vector<double> edges;  // n_bins + 1
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
  std::size_t bin_count() const { return counts.size(); }
};

/// Equal-width bin index; values outside [lo, hi] land in the nearest end bin.
int bin_index(double value, double lo, double hi, int n_bins);

/// Equal-width bins over [lo, hi].
Histogram vps_histogram(std::span<const VpsRecord> records, int n_bins, double lo, double hi);
/// Equal-width bins over [0, alpha*0.25 + beta].
Histogram vps_histogram(const VpsSnapshot& snapshot, int n_bins, const VpsWeights& weights);

struct TransitionMatrix {
  std::vector<double> bin_edges;            // n_bins + 1
  std::vector<std::vector<std::int64_t>> counts;  // [from_bin][to_bin]
  std::int64_t from_step = 0;
  std::int64_t to_step = 0;

  std::int64_t total() const;
  double diagonal_fraction() const;
};

/// Cell (i, j) counts prompts in bin i at `from` and bin j at `to`. Throws
/// std::invalid_argument unless both snapshots cover the same prompt ids.
TransitionMatrix transition_matrix(const VpsSnapshot& from, const VpsSnapshot& to, int n_bins, double lo, double hi);

/// Mean sampled pass rate over every prompt in `corpus`, n_samples rollouts each.
double validation_accuracy(const PolicySet& policies, const Corpus& corpus, int n_samples, Rng& rng);

}  // namespace vas
