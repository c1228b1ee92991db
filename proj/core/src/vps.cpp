// SPDX-License-Identifier: Apache-2.0
#include "vas/vps.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace vas {

void VpsWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta))
    throw std::invalid_argument("VpsWeights: alpha and beta must be finite and >= 0");
  if (alpha + beta <= 0.0) throw std::invalid_argument("VpsWeights: alpha and beta cannot both be zero");
}

double pass_rate(std::span<const int> rewards) {
  if (rewards.empty()) throw std::invalid_argument("pass_rate: empty reward list");
  long long hits = 0;
  for (int r : rewards) hits += r;
  return static_cast<double>(hits) / static_cast<double>(rewards.size());
}

double ovs(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ovs: pass rate outside [0, 1]");
  return p * (1.0 - p);
}

double compute_vps(double ovs_value, double tds_value, const VpsWeights& weights) {
  return weights.alpha * ovs_value + weights.beta * tds_value;
}

VpsRecord estimate_record(const PolicyParams& policy, const Prompt& prompt, int n_rollouts, std::int64_t step,
                          const VpsWeights& weights, const DiversityConfig& diversity, Rng& rng) {
  if (n_rollouts < 2) throw std::invalid_argument("estimate_record: n_rollouts must be >= 2");
  const auto rollouts = sample_rollouts(policy, prompt, n_rollouts, rng);
  std::vector<int> rewards;
  std::vector<TokenSeq> chains;
  rewards.reserve(rollouts.size());
  chains.reserve(rollouts.size());
  for (const auto& r : rollouts) {
    rewards.push_back(r.reward);
    chains.push_back(r.tokens);
  }
  VpsRecord rec;
  rec.prompt_id = prompt.id;
  rec.pass_rate = pass_rate(rewards);
  rec.ovs = ovs(rec.pass_rate);
  rec.tds = tds(chains, diversity);
  rec.vps = compute_vps(rec.ovs, rec.tds, weights);
  rec.last_refresh_step = step;
  rec.n_rollouts_used = n_rollouts;
  return rec;
}

VpsTable refresh_all(const VpsTable& table, const PolicySet& policies, const Corpus& corpus, int n_rollouts,
                     std::int64_t step, Rng& rng) {
  table.weights.validate();
  if (policies.size() != corpus.size()) throw std::invalid_argument("refresh_all: policy/corpus size mismatch");
  if (!table.records.empty() && table.records.size() != corpus.size())
    throw std::invalid_argument("refresh_all: table/corpus size mismatch");
  VpsTable next;
  next.weights = table.weights;
  next.diversity = table.diversity;
  next.records.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    next.records.push_back(
        estimate_record(policies[i], corpus.prompts[i], n_rollouts, step, table.weights, table.diversity, rng));
  return next;
}

std::string check_record(const VpsRecord& r, const VpsWeights& w) {
  if (r.n_rollouts_used < 1) return "n_rollouts_used < 1";
  if (!(r.pass_rate >= 0.0 && r.pass_rate <= 1.0)) return "pass_rate outside [0,1]";
  if (r.ovs != r.pass_rate * (1.0 - r.pass_rate)) return "ovs != p(1-p)";
  if (!(r.ovs >= 0.0 && r.ovs <= 0.25)) return "ovs outside [0,0.25]";
  if (!(r.tds >= 0.0 && r.tds <= 1.0)) return "tds outside [0,1]";
  if (r.vps != w.alpha * r.ovs + w.beta * r.tds) return "vps != alpha*ovs + beta*tds";
  const double scaled = r.pass_rate * r.n_rollouts_used;
  if (std::abs(scaled - std::round(scaled)) > 1e-9) return "pass_rate not a multiple of 1/n";
  return {};
}

std::string snapshot_jsonl(const VpsTable& table, std::int64_t step) {
  std::string out;
  for (const auto& r : table.records) {
    nlohmann::ordered_json o;
    o["step"] = step;
    o["prompt_id"] = r.prompt_id;
    o["pass_rate"] = r.pass_rate;
    o["ovs"] = r.ovs;
    o["tds"] = r.tds;
    o["vps"] = r.vps;
    out += o.dump();
    out += '\n';
  }
  return out;
}

std::vector<VpsSnapshot> parse_snapshots(const std::string& jsonl) {
  std::vector<VpsSnapshot> out;
  std::istringstream is(jsonl);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto o = nlohmann::json::parse(line);
    const auto step = o.at("step").get<std::int64_t>();
    if (out.empty() || out.back().step != step) out.push_back(VpsSnapshot{step, {}});
    VpsRecord r;
    r.prompt_id = o.at("prompt_id").get<PromptId>();
    r.pass_rate = o.at("pass_rate").get<double>();
    r.ovs = o.at("ovs").get<double>();
    r.tds = o.at("tds").get<double>();
    r.vps = o.at("vps").get<double>();
    r.last_refresh_step = step;
    out.back().records.push_back(r);
  }
  return out;
}

}  // namespace vas
