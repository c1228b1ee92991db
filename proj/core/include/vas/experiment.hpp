// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vas/analytics.hpp"
#include "vas/corpus.hpp"
#include "vas/diversity.hpp"
#include "vas/optimizer.hpp"
#include "vas/policy.hpp"
#include "vas/theory.hpp"
#include "vas/vps.hpp"

namespace vas {

/// Invalid or unknown configuration values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string preset = "default";

  // Corpus and initial policies.
  int n_prompts = 200;
  int vocab_size = 8;
  int seq_len = 6;
  int answer_space = 8;
  double bias_lo = -8.0;
  double bias_hi = 4.0;
  double verifier_noise = 0.0;
  double init_scale = 1.0;
  std::string init_mode = "random";  // random | solved

  // Variance-aware sampling.
  int n_rollouts = 32;  // rollouts per prompt for VPS estimation
  double mix_ratio = 0.5;
  double alpha = 0.8;
  double beta = 0.2;
  int t_update = 35;
  std::string diversity_metric = "inv_self_bleu_123";
  int ngram_max = 3;

  // Optimizer.
  double learning_rate = 2.0;
  double clip_epsilon = 0.2;
  int group_size = 8;
  std::string estimator = "grpo";
  std::string baseline_mode = "mean";
  double whitening_delta = 1e-4;
  int inner_epochs = 1;
  bool kl_penalty = false;
  double kl_coef = 0.01;

  // Run.
  int total_steps = 300;
  int batch_size = 32;
  std::uint64_t seed = 0;
  std::string output_dir;
  int val_every = 10;
  int val_samples = 8;
  int checkpoint_every = 50;

  // Theory suite (separate, enumerable corpus).
  int theory_prompts = 20;
  int theory_vocab_size = 4;
  int theory_seq_len = 4;
  int theory_answer_space = 4;
  double theory_verifier_noise = 0.2;
  double theory_init_scale = 1.0;
  int theory_draws = 10'000;
  int theory_baseline_draws = 100'000;

  // Ablation.
  int ablate_seeds = 3;
  double accuracy_threshold = 0.6;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;

  UpdateConfig update_config() const;
  VpsWeights vps_weights() const;
  DiversityConfig diversity_config() const;
};

/// Shipped defaults, or the "ablation" preset (N=8, lambda=0.5, alpha=beta=0.5, T_update=28).
ExperimentConfig make_preset(std::string_view name);

/// Every field, defaults included, in declaration order.
std::string config_to_json(const ExperimentConfig& config);
/// Reads a flat JSON object over the preset named by its "preset" key (default when absent).
/// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig config_from_json(const std::string& text);

Corpus build_corpus(const ExperimentConfig& config);
PolicySet build_policies(const ExperimentConfig& config, const Corpus& corpus);

struct TrainResult {
  std::filesystem::path run_dir;  // empty for in-memory runs
  std::vector<StepRecord> log;
  std::vector<VpsSnapshot> snapshots;
  std::vector<std::int64_t> selection_counts;  // per prompt index, whole run
  std::int64_t weighted_fallback_steps = 0;
  PolicySet final_policies;
};

/// Runs the sampling-and-update loop. With a non-empty output_dir it writes config.json,
/// corpus.json, run_log.csv, vps_snapshots.jsonl, sampler_trace.csv, checkpoint.json and
/// manifest.json there. With resume, continues from the directory's checkpoint; total_steps may
/// exceed the stored value, every other field must match it.
TrainResult run_train(const ExperimentConfig& config, bool resume = false);

/// First logged step whose validation accuracy reaches threshold.
std::optional<std::int64_t> steps_to_accuracy(const std::vector<StepRecord>& log, double threshold);
/// Mean grad_norm over records with step <= total_steps / 2.
double mean_grad_norm_first_half(const std::vector<StepRecord>& log, int total_steps);

/// Builds the theory corpus and policies from the config and runs every check.
/// Writes theory_report.json when output_dir is set.
TheoryReport run_theory(const ExperimentConfig& config);

enum class AblationDimension { mix_ratio, update_freq, n_rollouts, vps_ratio };
std::string_view to_string(AblationDimension dimension);
AblationDimension parse_ablation_dimension(std::string_view name);

struct AblationRow {
  std::string setting;
  ExperimentConfig config;
  double final_val_acc = 0.0;          // median over seeds
  double best_val_acc = 0.0;            // median over seeds
  std::optional<double> steps_to_threshold;  // median over seeds that reached it
  int seeds_reached = 0;
  double mean_grad_norm_first_half = 0.0;
  double min_selection_fraction = 0.0;  // rarest prompt's share of all draws, median over seeds
  int never_selected = 0;               // max over seeds
};

struct AblationTable {
  AblationDimension dimension = AblationDimension::mix_ratio;
  std::vector<AblationRow> rows;
  std::string to_json() const;
  std::string to_csv() const;
};

/// Settings swept for a dimension.
std::vector<ExperimentConfig> ablation_settings(const ExperimentConfig& base, AblationDimension dimension);

/// Runs each setting over ablate_seeds seeds (seed, seed+1, ...). When `settings` is
/// given it replaces the default sweep. Writes ablate_<dimension>.{json,csv} when
/// output_dir is set.
AblationTable run_ablate(const ExperimentConfig& config, AblationDimension dimension,
                         const std::optional<std::vector<ExperimentConfig>>& settings = std::nullopt);

/// Distribution and transition trends over a run's VPS snapshots. "Observed" binning
/// spans [0, max VPS seen in any snapshot]; "analytic" binning spans [0, alpha/4 + beta].
struct TrendSummary {
  int n_bins = 10;
  double observed_max = 0.0;
  double diagonal_first = 0.0;  // first refresh interval, observed binning
  double diagonal_last = 0.0;   // final refresh interval, observed binning
  double diagonal_first_analytic = 0.0;
  double diagonal_last_analytic = 0.0;
  double top_bin_initial = 0.0;  // mass fraction, observed binning
  double top_bin_final = 0.0;
  double top_bin_initial_analytic = 0.0;
  double top_bin_final_analytic = 0.0;
  int n_intervals = 0;
};

/// Needs at least three snapshots (two intervals).
TrendSummary summarize_trends(const std::vector<VpsSnapshot>& snapshots, const VpsWeights& weights, int n_bins = 10);

/// Summarizes a training run directory into report.json (histograms, transition
/// matrices, trend verdicts) and returns its text.
std::string make_report(const std::filesystem::path& run_dir, int n_bins = 10);

}  // namespace vas
