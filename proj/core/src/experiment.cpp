// SPDX-License-Identifier: Apache-2.0
#include "vas/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "vas/persist.hpp"
#include "vas/rng.hpp"
#include "vas/sampler.hpp"

namespace vas {

namespace {

using nlohmann::ordered_json;

// Calls f(name, field) for every config field in declaration order.
template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("preset", c.preset);
  f("n_prompts", c.n_prompts);
  f("vocab_size", c.vocab_size);
  f("seq_len", c.seq_len);
  f("answer_space", c.answer_space);
  f("bias_lo", c.bias_lo);
  f("bias_hi", c.bias_hi);
  f("verifier_noise", c.verifier_noise);
  f("init_scale", c.init_scale);
  f("init_mode", c.init_mode);
  f("n_rollouts", c.n_rollouts);
  f("mix_ratio", c.mix_ratio);
  f("alpha", c.alpha);
  f("beta", c.beta);
  f("t_update", c.t_update);
  f("diversity_metric", c.diversity_metric);
  f("ngram_max", c.ngram_max);
  f("learning_rate", c.learning_rate);
  f("clip_epsilon", c.clip_epsilon);
  f("group_size", c.group_size);
  f("estimator", c.estimator);
  f("baseline_mode", c.baseline_mode);
  f("whitening_delta", c.whitening_delta);
  f("inner_epochs", c.inner_epochs);
  f("kl_penalty", c.kl_penalty);
  f("kl_coef", c.kl_coef);
  f("total_steps", c.total_steps);
  f("batch_size", c.batch_size);
  f("seed", c.seed);
  f("output_dir", c.output_dir);
  f("val_every", c.val_every);
  f("val_samples", c.val_samples);
  f("checkpoint_every", c.checkpoint_every);
  f("theory_prompts", c.theory_prompts);
  f("theory_vocab_size", c.theory_vocab_size);
  f("theory_seq_len", c.theory_seq_len);
  f("theory_answer_space", c.theory_answer_space);
  f("theory_verifier_noise", c.theory_verifier_noise);
  f("theory_init_scale", c.theory_init_scale);
  f("theory_draws", c.theory_draws);
  f("theory_baseline_draws", c.theory_baseline_draws);
  f("ablate_seeds", c.ablate_seeds);
  f("accuracy_threshold", c.accuracy_threshold);
}

template <class T>
void assign_checked(const std::string& key, const nlohmann::json& value, T& field) {
  auto fail = [&](const char* expected) {
    throw ConfigError("config key '" + key + "' must be " + expected + ", got " + value.dump());
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (!value.is_boolean()) fail("a boolean");
    field = value.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!value.is_string()) fail("a string");
    field = value.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!value.is_number_unsigned()) fail("a non-negative integer");
    field = value.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!value.is_number_integer()) fail("an integer");
    const auto v = value.get<std::int64_t>();
    if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) fail("an integer in range");
    field = static_cast<T>(v);
  } else {
    if (!value.is_number()) fail("a number");
    field = value.get<T>();
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool is_finite_in(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

}  // namespace

void ExperimentConfig::validate() const {
  require(preset == "default" || preset == "ablation", "preset must be 'default' or 'ablation'");
  require(n_prompts >= 1, "n_prompts must be >= 1");
  require(vocab_size >= 2, "vocab_size must be >= 2");
  require(seq_len >= 1, "seq_len must be >= 1");
  require(answer_space >= 2, "answer_space must be >= 2");
  require(trajectory_count(vocab_size, seq_len) >= static_cast<std::uint64_t>(answer_space),
          "answer_space exceeds vocab_size^seq_len");
  require(std::isfinite(bias_lo) && std::isfinite(bias_hi) && bias_lo <= bias_hi, "need finite bias_lo <= bias_hi");
  require(is_finite_in(verifier_noise, 0.0, 0.5), "verifier_noise must lie in [0, 0.5]");
  require(is_finite_in(init_scale, 0.0, 1e6), "init_scale must be finite and >= 0");
  require(init_mode == "random" || init_mode == "solved", "init_mode must be 'random' or 'solved'");
  require(n_rollouts >= 2, "n_rollouts must be >= 2");
  require(is_finite_in(mix_ratio, 0.0, 1.0), "mix_ratio must lie in [0, 1]");
  require(t_update >= 1, "t_update must be >= 1");
  require(ngram_max >= 1, "ngram_max must be >= 1");
  require(diversity_metric != "distinct_n" || (seq_len >= ngram_max && theory_seq_len >= ngram_max),
          "distinct_n needs seq_len and theory_seq_len >= ngram_max");
  require(total_steps >= 0, "total_steps must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(val_every >= 1, "val_every must be >= 1");
  require(val_samples >= 1, "val_samples must be >= 1");
  require(checkpoint_every >= 1, "checkpoint_every must be >= 1");
  require(theory_prompts >= 1, "theory_prompts must be >= 1");
  require(theory_vocab_size >= 2 && theory_seq_len >= 1, "theory corpus needs vocab >= 2 and seq_len >= 1");
  require(theory_answer_space >= 2 &&
              trajectory_count(theory_vocab_size, theory_seq_len) >= static_cast<std::uint64_t>(theory_answer_space),
          "theory_answer_space must lie in [2, theory_vocab_size^theory_seq_len]");
  require(is_finite_in(theory_verifier_noise, 0.0, 0.5), "theory_verifier_noise must lie in [0, 0.5]");
  require(is_finite_in(theory_init_scale, 0.0, 1e6), "theory_init_scale must be finite and >= 0");
  require(theory_draws >= 2 && theory_baseline_draws >= 2, "theory draw counts must be >= 2");
  require(ablate_seeds >= 1, "ablate_seeds must be >= 1");
  require(is_finite_in(accuracy_threshold, 0.0, 1.0), "accuracy_threshold must lie in [0, 1]");
  try {
    vps_weights().validate();
    (void)diversity_config();
    const auto u = update_config();
    u.validate();
    require(u.estimator == Estimator::grpo || inner_epochs == 1, "inner_epochs > 1 requires estimator 'grpo'");
    require(u.estimator == Estimator::grpo || u.baseline_mode != BaselineMode::optimal ||
                trajectory_count(vocab_size, seq_len) <= 1'000'000,
            "baseline_mode 'optimal' needs an enumerable corpus (vocab_size^seq_len <= 1e6)");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

UpdateConfig ExperimentConfig::update_config() const {
  UpdateConfig u;
  u.learning_rate = learning_rate;
  u.clip_epsilon = clip_epsilon;
  u.group_size = group_size;
  u.baseline_mode = parse_baseline_mode(baseline_mode);
  u.estimator = parse_estimator(estimator);
  u.whitening_delta = whitening_delta;
  u.inner_epochs = inner_epochs;
  u.kl_penalty = kl_penalty;
  u.kl_coef = kl_coef;
  return u;
}

VpsWeights ExperimentConfig::vps_weights() const { return VpsWeights{alpha, beta}; }

DiversityConfig ExperimentConfig::diversity_config() const {
  return DiversityConfig{parse_diversity_metric(diversity_metric), ngram_max};
}

ExperimentConfig make_preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "default") return c;
  if (name == "ablation") {
    c.preset = "ablation";
    c.n_rollouts = 8;
    c.mix_ratio = 0.5;
    c.alpha = 0.5;
    c.beta = 0.5;
    c.t_update = 28;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

std::string config_to_json(const ExperimentConfig& config) {
  ordered_json j;
  visit_fields(config, [&](const char* name, const auto& field) { j[name] = field; });
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string preset = "default";
  if (j.contains("preset")) assign_checked("preset", j.at("preset"), preset);
  ExperimentConfig c = make_preset(preset);
  for (const auto& [key, value] : j.items()) {
    bool found = false;
    visit_fields(c, [&](const char* name, auto& field) {
      if (key != name) return;
      found = true;
      assign_checked(key, value, field);
    });
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

Corpus build_corpus(const ExperimentConfig& config) {
  return generate_corpus(config.n_prompts, config.vocab_size, config.seq_len, config.answer_space,
                         DifficultySpec{config.bias_lo, config.bias_hi, config.verifier_noise},
                         derive_seed(config.seed, "corpus"));
}

namespace {

PolicySet solved_policies(const Corpus& corpus) {
  PolicySet out;
  for (const auto& prompt : corpus.prompts) {
    // Tokens (target, 0, 0, ...) sum to the target answer.
    TokenSeq chain(static_cast<std::size_t>(corpus.seq_len), 0);
    int rest = prompt.target_answer;
    for (auto& tok : chain) {
      tok = std::min(rest, corpus.vocab_size - 1);
      rest -= tok;
    }
    out.push_back(concentrated_policy(corpus.vocab_size, chain, 1000.0));
  }
  return out;
}

}  // namespace

PolicySet build_policies(const ExperimentConfig& config, const Corpus& corpus) {
  if (config.init_mode == "solved") return solved_policies(corpus);
  return init_policy(corpus, config.init_scale, derive_seed(config.seed, "policy_init"));
}

namespace {

const char* portion_name(Portion p, bool fallback) {
  if (p == Portion::uniform) return "uniform";
  return fallback ? "weighted_fallback" : "weighted";
}

struct Streams {
  Rng rollouts;
  Rng sampler;
  Rng refresh;
  Rng validation;
};

std::map<std::string, std::string> save_streams(const Streams& s) {
  return {{"rollouts", save_state(s.rollouts)},
          {"sampler", save_state(s.sampler)},
          {"refresh", save_state(s.refresh)},
          {"validation", save_state(s.validation)}};
}

void restore_streams(Streams& s, const std::map<std::string, std::string>& states) {
  auto get = [&](const char* name) -> const std::string& {
    const auto it = states.find(name);
    if (it == states.end()) throw std::invalid_argument(std::string("checkpoint: missing rng state '") + name + "'");
    return it->second;
  };
  restore_state(s.rollouts, get("rollouts"));
  restore_state(s.sampler, get("sampler"));
  restore_state(s.refresh, get("refresh"));
  restore_state(s.validation, get("validation"));
}

// Keeps lines whose leading integer field is <= max_step (header always kept).
std::string truncate_by_step(const std::string& text, std::int64_t max_step, bool has_header) {
  std::istringstream is(text);
  std::string line;
  std::string out;
  bool first = true;
  while (std::getline(is, line)) {
    if (first && has_header) {
      out += line + '\n';
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::int64_t step = 0;
    if (line.front() == '{')
      step = nlohmann::json::parse(line).at("step").get<std::int64_t>();
    else
      step = std::stoll(line.substr(0, line.find(',')));
    if (step <= max_step) out += line + '\n';
  }
  return out;
}

void append_line(std::ofstream& out, const std::string& text) {
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed");
}

}  // namespace

TrainResult run_train(const ExperimentConfig& config, bool resume) {
  config.validate();
  const bool persist = !config.output_dir.empty();
  if (resume && !persist) throw ConfigError("resume requires output_dir");
  const std::filesystem::path dir = config.output_dir;
  const UpdateConfig update = config.update_config();

  const Corpus corpus = build_corpus(config);
  PolicySet policies = build_policies(config, corpus);
  const PolicySet reference = policies;
  Streams streams{make_stream(config.seed, "rollouts"), make_stream(config.seed, "sampler"),
                  make_stream(config.seed, "refresh"), make_stream(config.seed, "validation")};
  SamplerConfig sampler_config{config.batch_size, config.mix_ratio, config.seed};

  TrainResult result;
  result.run_dir = dir;
  result.selection_counts.assign(corpus.size(), 0);

  VpsTable table;
  table.weights = config.vps_weights();
  table.diversity = config.diversity_config();

  std::int64_t start_step = 1;
  RunLog log;
  std::ofstream snapshots_out;
  std::ofstream trace_out;
  const std::string config_text = config_to_json(config);

  if (persist) {
    std::filesystem::create_directories(dir);
    if (resume) {
      // total_steps may grow on resume; every other field must match.
      ExperimentConfig stored = config_from_json(read_text_file(dir / "config.json"));
      stored.total_steps = config.total_steps;
      if (config_to_json(stored) != config_text)
        throw ConfigError("resume: config differs from the run directory's config.json");
      write_text_file(dir / "config.json", config_text);
      const Checkpoint ck = checkpoint_from_json(read_text_file(dir / "checkpoint.json"));
      if (ck.policies.size() != corpus.size() || ck.vps_records.size() != corpus.size())
        throw std::invalid_argument("resume: checkpoint does not match the corpus");
      policies = ck.policies;
      table.records = ck.vps_records;
      restore_streams(streams, ck.rng_states);
      start_step = ck.step + 1;

      auto prior = parse_run_log_csv(truncate_by_step(read_text_file(dir / "run_log.csv"), ck.step, true));
      const auto snaps = truncate_by_step(read_text_file(dir / "vps_snapshots.jsonl"), ck.step, false);
      const auto trace = truncate_by_step(read_text_file(dir / "sampler_trace.csv"), ck.step, true);
      result.snapshots = parse_snapshots(snaps);
      write_text_file(dir / "vps_snapshots.jsonl", snaps);
      write_text_file(dir / "sampler_trace.csv", trace);
      std::istringstream tr(trace);
      std::string line;
      std::getline(tr, line);
      while (std::getline(tr, line)) {
        std::vector<std::string> fields;  // step,slot,prompt_index,prompt_id,portion
        std::istringstream ls(line);
        for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
        if (fields.size() != 5) throw std::invalid_argument("resume: malformed sampler trace line");
        ++result.selection_counts.at(std::stoull(fields[2]));
        if (fields[1] == "0" && fields[4] == "weighted_fallback") ++result.weighted_fallback_steps;
      }
      log = RunLog(dir / "run_log.csv", prior);
      snapshots_out.open(dir / "vps_snapshots.jsonl", std::ios::binary | std::ios::app);
      trace_out.open(dir / "sampler_trace.csv", std::ios::binary | std::ios::app);
    } else {
      write_text_file(dir / "config.json", config_text);
      write_text_file(dir / "corpus.json", corpus_to_json(corpus));
      log = RunLog(dir / "run_log.csv");
      snapshots_out.open(dir / "vps_snapshots.jsonl", std::ios::binary | std::ios::trunc);
      trace_out.open(dir / "sampler_trace.csv", std::ios::binary | std::ios::trunc);
      append_line(trace_out, "step,slot,prompt_index,prompt_id,portion\n");
    }
    if (!snapshots_out || !trace_out) throw std::runtime_error("cannot open run files in " + dir.string());
  }

  auto write_checkpoint = [&](std::int64_t step, const PolicySet& p, const std::vector<VpsRecord>& records,
                              const Streams& s) {
    if (!persist) return;
    Checkpoint ck;
    ck.step = step;
    ck.policies = p;
    ck.vps_records = records;
    ck.rng_states = save_streams(s);
    write_text_file(dir / "checkpoint.json", checkpoint_to_json(ck));
  };
  auto emit_snapshot = [&](std::int64_t step) {
    VpsSnapshot snap{step, table.records};
    result.snapshots.push_back(std::move(snap));
    if (persist) append_line(snapshots_out, snapshot_jsonl(table, step));
  };

  if (!resume) {
    table = refresh_all(table, policies, corpus, config.n_rollouts, 0, streams.refresh);
    emit_snapshot(0);
  }

  bool warned_fallback = false;
  for (std::int64_t step = start_step; step <= config.total_steps; ++step) {
    const PolicySet safe_policies = policies;
    const std::vector<VpsRecord> safe_records = table.records;
    const Streams safe_streams = streams;
    try {
      if (step % config.t_update == 0) {
        table = refresh_all(table, policies, corpus, config.n_rollouts, step, streams.refresh);
        emit_snapshot(step);
      }

      const Batch batch = draw_batch(table, sampler_config, streams.sampler);
      if (batch.weighted_fallback) {
        ++result.weighted_fallback_steps;
        if (!warned_fallback) {
          std::cerr << "warning: every VPS is zero at step " << step
                    << "; weighted slots fall back to uniform draws\n";
          warned_fallback = true;
        }
      }
      std::string trace_lines;
      for (std::size_t s = 0; s < batch.prompt_ids.size(); ++s) {
        ++result.selection_counts[batch.prompt_indices[s]];
        if (persist)
          trace_lines += std::to_string(step) + ',' + std::to_string(s) + ',' + std::to_string(batch.prompt_indices[s]) +
                         ',' + std::to_string(batch.prompt_ids[s]) + ',' +
                         portion_name(batch.portions[s], batch.weighted_fallback) + '\n';
      }

      // Rollouts for every batch slot come from the policies as they were at step start.
      struct Group {
        std::size_t index;
        std::vector<TokenSeq> seqs;
        std::vector<double> rewards;
        std::vector<double> advantages;
      };
      std::vector<Group> groups;
      groups.reserve(batch.prompt_indices.size());
      double reward_sum = 0.0;
      std::size_t reward_count = 0;
      for (std::size_t idx : batch.prompt_indices) {
        Group g;
        g.index = idx;
        for (auto& ro : sample_rollouts(policies[idx], corpus.prompts[idx], update.group_size, streams.rollouts)) {
          g.seqs.push_back(std::move(ro.tokens));
          g.rewards.push_back(ro.reward);
          reward_sum += ro.reward;
          ++reward_count;
        }
        if (update.estimator == Estimator::grpo)
          g.advantages = grpo_advantages(g.rewards, update.whitening_delta).whitened;
        groups.push_back(std::move(g));
      }

      std::map<std::size_t, PolicyParams> old;
      for (const auto& g : groups) old.emplace(g.index, policies[g.index]);

      ClipStats clip;
      double grad_norm = 0.0;
      for (int epoch = 0; epoch < update.inner_epochs; ++epoch) {
        std::map<std::size_t, GradientVector> grads;
        for (const auto& g : groups) {
          auto& acc = grads.try_emplace(g.index, GradientVector(policies[g.index].dim(), 0.0)).first->second;
          const PolicyParams& current = policies[g.index];
          if (update.estimator == Estimator::grpo) {
            const auto gg = grpo_grad(current, old.at(g.index), g.seqs, g.advantages, update.clip_epsilon);
            clip += gg.clip;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += gg.gradient[i];
          } else {
            Baseline b{update.baseline_mode, 0.0};
            if (b.mode == BaselineMode::optimal) b.value = exact_pass_rate(current, corpus.prompts[g.index]);
            const auto rg = reinforce_grad(current, g.seqs, g.rewards, b);
            clip += ClipStats{0, g.seqs.size()};
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += rg[i];
          }
          if (update.kl_penalty)
            accumulate_kl_penalty_grad(current, reference[g.index], g.seqs, update.kl_coef, acc);
        }
        if (epoch == 0) {
          double sq = 0.0;
          for (const auto& [idx, grad] : grads)
            for (double x : grad) sq += x * x;
          grad_norm = std::sqrt(sq);
        }
        for (const auto& [idx, grad] : grads) apply_update(policies[idx], grad, update.learning_rate);
      }

      StepRecord rec;
      rec.step = step;
      rec.grad_norm = grad_norm;
      rec.clip_fraction = clip.fraction();
      rec.batch_mean_reward = reward_count ? reward_sum / static_cast<double>(reward_count) : 0.0;
      if (step % config.val_every == 0)
        rec.val_acc = validation_accuracy(policies, corpus, config.val_samples, streams.validation);
      if (persist) append_line(trace_out, trace_lines);
      log.record_step(rec);

      if (step % config.checkpoint_every == 0 || step == config.total_steps)
        write_checkpoint(step, policies, table.records, streams);
    } catch (...) {
      write_checkpoint(step - 1, safe_policies, safe_records, safe_streams);
      throw;
    }
  }

  if (persist) {
    if (config.total_steps == 0 || start_step > config.total_steps)
      write_checkpoint(std::max<std::int64_t>(0, std::min<std::int64_t>(config.total_steps, start_step - 1)), policies,
                       table.records, streams);
    snapshots_out.close();
    trace_out.close();
    write_manifest(dir, {"config.json", "corpus.json", "run_log.csv", "vps_snapshots.jsonl", "sampler_trace.csv",
                         "checkpoint.json"});
  }
  result.log = log.records();
  result.final_policies = std::move(policies);
  return result;
}

std::optional<std::int64_t> steps_to_accuracy(const std::vector<StepRecord>& log, double threshold) {
  for (const auto& r : log)
    if (r.val_acc && *r.val_acc >= threshold) return r.step;
  return std::nullopt;
}

double mean_grad_norm_first_half(const std::vector<StepRecord>& log, int total_steps) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : log)
    if (2 * r.step <= total_steps) {
      sum += r.grad_norm;
      ++n;
    }
  return n ? sum / n : 0.0;
}

TheoryReport run_theory(const ExperimentConfig& config) {
  config.validate();
  ExperimentConfig corpus_config = config;
  corpus_config.n_prompts = config.theory_prompts;
  corpus_config.vocab_size = config.theory_vocab_size;
  corpus_config.seq_len = config.theory_seq_len;
  corpus_config.answer_space = config.theory_answer_space;
  corpus_config.verifier_noise = config.theory_verifier_noise;
  corpus_config.init_scale = config.theory_init_scale;
  const Corpus corpus = generate_corpus(corpus_config.n_prompts, corpus_config.vocab_size, corpus_config.seq_len,
                                        corpus_config.answer_space,
                                        DifficultySpec{config.bias_lo, config.bias_hi, config.theory_verifier_noise},
                                        derive_seed(config.seed, "theory_corpus"));
  const PolicySet policies = config.init_mode == "solved"
                                 ? solved_policies(corpus)
                                 : init_policy(corpus, config.theory_init_scale, derive_seed(config.seed, "theory_policy"));
  TheoryOptions options;
  options.progress.draws = config.theory_draws;
  options.progress.group_size = config.group_size;
  options.baseline_draws = config.theory_baseline_draws;
  options.weights = config.vps_weights();
  options.diversity = config.diversity_config();
  TheoryReport report = run_theory_checks(policies, corpus, options, derive_seed(config.seed, "theory"));
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
    write_text_file(std::filesystem::path(config.output_dir) / "config.json", config_to_json(config));
    write_text_file(std::filesystem::path(config.output_dir) / "theory_report.json", report.to_json());
  }
  return report;
}

std::string_view to_string(AblationDimension dimension) {
  switch (dimension) {
    case AblationDimension::mix_ratio: return "mix_ratio";
    case AblationDimension::update_freq: return "update_freq";
    case AblationDimension::n_rollouts: return "n_rollouts";
    case AblationDimension::vps_ratio: return "vps_ratio";
  }
  return "unknown";
}

AblationDimension parse_ablation_dimension(std::string_view name) {
  if (name == "mix_ratio") return AblationDimension::mix_ratio;
  if (name == "update_freq") return AblationDimension::update_freq;
  if (name == "n_rollouts") return AblationDimension::n_rollouts;
  if (name == "vps_ratio") return AblationDimension::vps_ratio;
  throw ConfigError("unknown ablation dimension '" + std::string(name) + "'");
}

std::vector<ExperimentConfig> ablation_settings(const ExperimentConfig& base, AblationDimension dimension) {
  std::vector<ExperimentConfig> out;
  switch (dimension) {
    case AblationDimension::mix_ratio:
      for (double v : {0.2, 0.5, 0.8, 1.0}) {
        auto c = base;
        c.mix_ratio = v;
        out.push_back(c);
      }
      break;
    case AblationDimension::update_freq:
      for (int v : {4, 7, 14, 28, 35, 56}) {
        auto c = base;
        c.t_update = v;
        out.push_back(c);
      }
      break;
    case AblationDimension::n_rollouts:
      for (int v : {8, 16, 32}) {
        auto c = base;
        c.n_rollouts = v;
        out.push_back(c);
      }
      break;
    case AblationDimension::vps_ratio:
      for (auto [a, b] : {std::pair{0.0, 1.0}, {0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}, {1.0, 0.0}}) {
        auto c = base;
        c.alpha = a;
        c.beta = b;
        out.push_back(c);
      }
      break;
  }
  return out;
}

namespace {

std::string setting_label(const ExperimentConfig& c, AblationDimension dimension) {
  switch (dimension) {
    case AblationDimension::mix_ratio: return "mix_ratio=" + format_double(c.mix_ratio);
    case AblationDimension::update_freq: return "t_update=" + std::to_string(c.t_update);
    case AblationDimension::n_rollouts: return "n_rollouts=" + std::to_string(c.n_rollouts);
    case AblationDimension::vps_ratio: return "alpha=" + format_double(c.alpha) + ",beta=" + format_double(c.beta);
  }
  return {};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

AblationTable run_ablate(const ExperimentConfig& config, AblationDimension dimension,
                         const std::optional<std::vector<ExperimentConfig>>& settings) {
  config.validate();
  AblationTable table;
  table.dimension = dimension;
  const auto sweep = settings ? *settings : ablation_settings(config, dimension);
  for (const auto& setting : sweep) {
    AblationRow row;
    row.setting = setting_label(setting, dimension);
    row.config = setting;
    std::vector<double> finals, bests, steps, norms, min_fracs;
    for (int s = 0; s < config.ablate_seeds; ++s) {
      auto c = setting;
      c.seed = setting.seed + static_cast<std::uint64_t>(s);
      c.output_dir.clear();
      const auto run = run_train(c);
      double final_acc = 0.0, best = 0.0;
      for (const auto& r : run.log)
        if (r.val_acc) {
          final_acc = *r.val_acc;
          best = std::max(best, *r.val_acc);
        }
      finals.push_back(final_acc);
      bests.push_back(best);
      if (const auto st = steps_to_accuracy(run.log, config.accuracy_threshold)) steps.push_back(static_cast<double>(*st));
      norms.push_back(mean_grad_norm_first_half(run.log, c.total_steps));
      std::int64_t total = 0, least = std::numeric_limits<std::int64_t>::max();
      int never = 0;
      for (auto n : run.selection_counts) {
        total += n;
        least = std::min(least, n);
        if (n == 0) ++never;
      }
      min_fracs.push_back(total ? static_cast<double>(least) / static_cast<double>(total) : 0.0);
      row.never_selected = std::max(row.never_selected, never);
    }
    row.final_val_acc = median_of(finals);
    row.best_val_acc = median_of(bests);
    row.seeds_reached = static_cast<int>(steps.size());
    if (!steps.empty()) row.steps_to_threshold = median_of(steps);
    row.mean_grad_norm_first_half = median_of(norms);
    row.min_selection_fraction = median_of(min_fracs);
    table.rows.push_back(std::move(row));
  }
  if (!config.output_dir.empty()) {
    const std::filesystem::path dir = config.output_dir;
    std::filesystem::create_directories(dir);
    const std::string stem = "ablate_" + std::string(to_string(dimension));
    write_text_file(dir / (stem + ".json"), table.to_json());
    write_text_file(dir / (stem + ".csv"), table.to_csv());
  }
  return table;
}

std::string AblationTable::to_json() const {
  ordered_json j;
  j["dimension"] = to_string(dimension);
  auto& rows_j = j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["setting"] = r.setting;
    o["mix_ratio"] = r.config.mix_ratio;
    o["t_update"] = r.config.t_update;
    o["n_rollouts"] = r.config.n_rollouts;
    o["alpha"] = r.config.alpha;
    o["beta"] = r.config.beta;
    o["final_val_acc"] = r.final_val_acc;
    o["best_val_acc"] = r.best_val_acc;
    o["steps_to_threshold"] = r.steps_to_threshold ? ordered_json(*r.steps_to_threshold) : ordered_json(nullptr);
    o["seeds_reached"] = r.seeds_reached;
    o["mean_grad_norm_first_half"] = r.mean_grad_norm_first_half;
    o["min_selection_fraction"] = r.min_selection_fraction;
    o["never_selected"] = r.never_selected;
    rows_j.push_back(std::move(o));
  }
  return j.dump(2) + "\n";
}

std::string AblationTable::to_csv() const {
  std::string out =
      "setting,final_val_acc,best_val_acc,steps_to_threshold,seeds_reached,mean_grad_norm_first_half,"
      "min_selection_fraction,never_selected\n";
  for (const auto& r : rows) {
    out += '"' + r.setting + "\"," + format_double(r.final_val_acc) + ',' + format_double(r.best_val_acc) + ',' +
           (r.steps_to_threshold ? format_double(*r.steps_to_threshold) : std::string()) + ',' +
           std::to_string(r.seeds_reached) + ',' + format_double(r.mean_grad_norm_first_half) + ',' +
           format_double(r.min_selection_fraction) + ',' + std::to_string(r.never_selected) + '\n';
  }
  return out;
}

TrendSummary summarize_trends(const std::vector<VpsSnapshot>& snapshots, const VpsWeights& weights, int n_bins) {
  if (snapshots.size() < 3) throw std::invalid_argument("summarize_trends: need at least three snapshots");
  TrendSummary t;
  t.n_bins = n_bins;
  t.n_intervals = static_cast<int>(snapshots.size()) - 1;
  for (const auto& s : snapshots)
    for (const auto& r : s.records) t.observed_max = std::max(t.observed_max, r.vps);
  const double analytic_max = weights.max_vps();
  const double observed_max = t.observed_max > 0.0 ? t.observed_max : analytic_max;

  const auto& first = snapshots.front();
  const auto& last = snapshots.back();
  t.diagonal_first = transition_matrix(snapshots[0], snapshots[1], n_bins, 0.0, observed_max).diagonal_fraction();
  t.diagonal_last = transition_matrix(snapshots[snapshots.size() - 2], last, n_bins, 0.0, observed_max).diagonal_fraction();
  t.diagonal_first_analytic = transition_matrix(snapshots[0], snapshots[1], n_bins, 0.0, analytic_max).diagonal_fraction();
  t.diagonal_last_analytic =
      transition_matrix(snapshots[snapshots.size() - 2], last, n_bins, 0.0, analytic_max).diagonal_fraction();

  auto top_mass = [&](const VpsSnapshot& s, double hi) {
    const auto h = vps_histogram(s.records, n_bins, 0.0, hi);
    return static_cast<double>(h.counts.back()) / static_cast<double>(h.total());
  };
  t.top_bin_initial = top_mass(first, observed_max);
  t.top_bin_final = top_mass(last, observed_max);
  t.top_bin_initial_analytic = top_mass(first, analytic_max);
  t.top_bin_final_analytic = top_mass(last, analytic_max);
  return t;
}

std::string make_report(const std::filesystem::path& run_dir, int n_bins) {
  const ExperimentConfig config = config_from_json(read_text_file(run_dir / "config.json"));
  const auto log = parse_run_log_csv(read_text_file(run_dir / "run_log.csv"));
  const auto snapshots = parse_snapshots(read_text_file(run_dir / "vps_snapshots.jsonl"));
  const VpsWeights weights = config.vps_weights();

  double observed_max = 0.0;
  for (const auto& s : snapshots)
    for (const auto& r : s.records) observed_max = std::max(observed_max, r.vps);
  const double hi = observed_max > 0.0 ? observed_max : weights.max_vps();

  ordered_json j;
  j["run_dir"] = run_dir.string();
  j["n_bins"] = n_bins;
  j["analytic_vps_max"] = weights.max_vps();
  j["observed_vps_max"] = observed_max;

  auto& hists = j["histograms"] = ordered_json::array();
  for (const auto& s : snapshots) {
    ordered_json o;
    o["step"] = s.step;
    const auto ha = vps_histogram(s, n_bins, weights);
    o["analytic_edges"] = ha.edges;
    o["analytic_counts"] = ha.counts;
    const auto ho = vps_histogram(s.records, n_bins, 0.0, hi);
    o["observed_edges"] = ho.edges;
    o["observed_counts"] = ho.counts;
    hists.push_back(std::move(o));
  }
  auto& trans = j["transitions"] = ordered_json::array();
  for (std::size_t k = 0; k + 1 < snapshots.size(); ++k) {
    const auto m = transition_matrix(snapshots[k], snapshots[k + 1], n_bins, 0.0, hi);
    ordered_json o;
    o["from_step"] = m.from_step;
    o["to_step"] = m.to_step;
    o["bin_edges"] = m.bin_edges;
    o["counts"] = m.counts;
    o["diagonal_fraction"] = m.diagonal_fraction();
    o["diagonal_fraction_analytic"] =
        transition_matrix(snapshots[k], snapshots[k + 1], n_bins, 0.0, weights.max_vps()).diagonal_fraction();
    trans.push_back(std::move(o));
  }

  auto& trends = j["trends"];
  const auto st = steps_to_accuracy(log, config.accuracy_threshold);
  trends["accuracy_threshold"] = config.accuracy_threshold;
  trends["steps_to_threshold"] = st ? ordered_json(*st) : ordered_json(nullptr);
  trends["mean_grad_norm_first_half"] = mean_grad_norm_first_half(log, config.total_steps);
  std::optional<double> final_acc;
  for (const auto& r : log)
    if (r.val_acc) final_acc = r.val_acc;
  trends["final_val_acc"] = final_acc ? ordered_json(*final_acc) : ordered_json(nullptr);
  if (snapshots.size() >= 3) {
    const auto t = summarize_trends(snapshots, weights, n_bins);
    trends["diagonal_first"] = t.diagonal_first;
    trends["diagonal_last"] = t.diagonal_last;
    trends["diagonal_concentrates"] = t.diagonal_last > t.diagonal_first;
    trends["top_bin_initial"] = t.top_bin_initial;
    trends["top_bin_final"] = t.top_bin_final;
    trends["top_bin_shrinks"] = t.top_bin_final < t.top_bin_initial;
    trends["top_bin_initial_analytic"] = t.top_bin_initial_analytic;
    trends["top_bin_final_analytic"] = t.top_bin_final_analytic;
    trends["top_bin_shrinks_analytic"] = t.top_bin_final_analytic < t.top_bin_initial_analytic;
  } else {
    trends["note"] = "fewer than three VPS snapshots; transition trends need two refresh intervals";
  }
  const std::string text = j.dump(2) + "\n";
  write_text_file(run_dir / "report.json", text);
  return text;
}

}  // namespace vas
