// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "vas/experiment.hpp"
#include "vas/persist.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitTheory = 3;

struct CommonOptions {
  std::string preset = "default";
  std::string config_path;
  std::optional<double> mix_ratio;
  std::optional<int> t_update;
  std::optional<int> n_rollouts;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::string out;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--preset", o.preset, "Named defaults: default | ablation");
  cmd->add_option("--config", o.config_path, "Flat JSON config file (over the preset)");
  cmd->add_option("--mix-ratio", o.mix_ratio, "Fraction of each batch drawn VPS-weighted");
  cmd->add_option("--t-update", o.t_update, "Steps between VPS refreshes");
  cmd->add_option("--n-rollouts", o.n_rollouts, "Rollouts per prompt for VPS estimation");
  cmd->add_option("--alpha", o.alpha, "OVS weight");
  cmd->add_option("--beta", o.beta, "TDS weight");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--steps", o.steps, "Total optimizer steps");
  cmd->add_option("--out", o.out, "Output directory (default: $VAS_OUTPUT_ROOT/<verb>_seed<seed>)");
  cmd->add_option("--set", o.sets, "Override any config key: key=value (value parsed as JSON when possible)");
}

vas::ExperimentConfig build_config(const CommonOptions& o, const std::string& verb) {
  nlohmann::json j = nlohmann::json::parse(vas::config_to_json(vas::make_preset(o.preset)));
  if (!o.config_path.empty()) {
    const auto file = nlohmann::json::parse(vas::read_text_file(o.config_path), nullptr, false);
    if (file.is_discarded() || !file.is_object()) throw vas::ConfigError("config file is not a JSON object");
    if (file.contains("preset") && file.at("preset") != j.at("preset"))
      j = nlohmann::json::parse(vas::config_to_json(vas::make_preset(file.at("preset").get<std::string>())));
    for (const auto& [k, v] : file.items()) j[k] = v;
  }
  if (o.mix_ratio) j["mix_ratio"] = *o.mix_ratio;
  if (o.t_update) j["t_update"] = *o.t_update;
  if (o.n_rollouts) j["n_rollouts"] = *o.n_rollouts;
  if (o.alpha) j["alpha"] = *o.alpha;
  if (o.beta) j["beta"] = *o.beta;
  if (o.seed) j["seed"] = *o.seed;
  if (o.steps) j["total_steps"] = *o.steps;
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw vas::ConfigError("--set expects key=value, got '" + s + "'");
    const auto key = s.substr(0, eq);
    const auto raw = s.substr(eq + 1);
    auto value = nlohmann::json::parse(raw, nullptr, false);
    j[key] = value.is_discarded() ? nlohmann::json(raw) : value;
  }
  auto config = vas::config_from_json(j.dump());
  if (!o.out.empty()) {
    config.output_dir = o.out;
  } else if (config.output_dir.empty()) {
    const char* root = std::getenv("VAS_OUTPUT_ROOT");
    config.output_dir =
        (std::filesystem::path(root && *root ? root : "runs") / (verb + "_seed" + std::to_string(config.seed))).string();
  }
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variance-aware prompt sampling for group policy optimization on a synthetic task"};
  app.require_subcommand(1);

  CommonOptions train_opts, theory_opts, ablate_opts;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Run one training job and persist its artifacts");
  add_common(train, train_opts);
  train->add_flag("--resume", resume, "Continue from the output directory's checkpoint");

  auto* theory = app.add_subcommand("theory", "Run the variance and progress checks on an enumerable corpus");
  add_common(theory, theory_opts);

  std::string dimension;
  auto* ablate = app.add_subcommand("ablate", "Sweep one hyper-parameter and tabulate validation accuracy");
  add_common(ablate, ablate_opts);
  ablate->add_option("--dimension", dimension, "mix_ratio | update_freq | n_rollouts | vps_ratio")->required();

  std::string run_dir;
  int n_bins = 10;
  auto* report = app.add_subcommand("report", "Summarize a training run directory into report.json");
  report->add_option("run_dir", run_dir, "Training run directory")->required();
  report->add_option("--bins", n_bins, "Histogram bin count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) {
      const auto config = build_config(train_opts, "train");
      const auto result = vas::run_train(config, resume);
      std::cout << "wrote " << result.run_dir.string() << " (" << result.log.size() << " steps logged)\n";
      return kExitOk;
    }
    if (*theory) {
      const auto config = build_config(theory_opts, "theory");
      const auto rep = vas::run_theory(config);
      const auto failures = rep.failures();
      for (const auto& f : failures) std::cerr << "theory: " << f << '\n';
      std::cout << "wrote " << (std::filesystem::path(config.output_dir) / "theory_report.json").string() << " ("
                << rep.prompts.size() << " prompts, " << failures.size() << " failures)\n";
      return failures.empty() ? kExitOk : kExitTheory;
    }
    if (*ablate) {
      const auto dim = vas::parse_ablation_dimension(dimension);
      const auto config = build_config(ablate_opts, "ablate_" + dimension);
      const auto table = vas::run_ablate(config, dim);
      std::cout << table.to_csv();
      return kExitOk;
    }
    if (*report) {
      if (n_bins < 2) throw vas::ConfigError("--bins must be >= 2");
      vas::make_report(run_dir, n_bins);
      std::cout << "wrote " << (std::filesystem::path(run_dir) / "report.json").string() << '\n';
      return kExitOk;
    }
  } catch (const vas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
