// SPDX-License-Identifier: Apache-2.0
#include "vas/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace vas {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

std::string format_step_record(const StepRecord& r) {
  std::string line = std::to_string(r.step);
  line += ',';
  line += format_double(r.grad_norm);
  line += ',';
  line += format_double(r.clip_fraction);
  line += ',';
  line += format_double(r.batch_mean_reward);
  line += ',';
  if (r.val_acc) line += format_double(*r.val_acc);
  return line;
}

std::string run_log_to_csv(std::span<const StepRecord> records) {
  std::string out = kRunLogHeader;
  out += '\n';
  for (const auto& r : records) {
    out += format_step_record(r);
    out += '\n';
  }
  return out;
}

namespace {

double parse_double_field(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw std::invalid_argument("run log line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
  return v;
}

std::int64_t parse_int_field(std::string_view field, std::size_t line_no) {
  std::int64_t v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw std::invalid_argument("run log line " + std::to_string(line_no) + ": bad step '" + std::string(field) + "'");
  return v;
}

void validate_record(const StepRecord& r) {
  if (!(r.grad_norm >= 0.0) || !std::isfinite(r.grad_norm)) throw std::invalid_argument("run log: grad_norm must be finite and >= 0");
  if (!(r.clip_fraction >= 0.0 && r.clip_fraction <= 1.0)) throw std::invalid_argument("run log: clip_fraction outside [0, 1]");
  if (!std::isfinite(r.batch_mean_reward)) throw std::invalid_argument("run log: non-finite batch_mean_reward");
  if (r.val_acc && !(*r.val_acc >= 0.0 && *r.val_acc <= 1.0)) throw std::invalid_argument("run log: val_acc outside [0, 1]");
}

}  // namespace

std::vector<StepRecord> parse_run_log_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kRunLogHeader) throw std::invalid_argument("run log: missing or wrong header");
  std::vector<StepRecord> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 5) throw std::invalid_argument("run log line " + std::to_string(line_no) + ": expected 5 fields");
    StepRecord r;
    r.step = parse_int_field(fields[0], line_no);
    r.grad_norm = parse_double_field(fields[1], line_no);
    r.clip_fraction = parse_double_field(fields[2], line_no);
    r.batch_mean_reward = parse_double_field(fields[3], line_no);
    if (!fields[4].empty()) r.val_acc = parse_double_field(fields[4], line_no);
    if (!out.empty() && r.step <= out.back().step)
      throw std::invalid_argument("run log line " + std::to_string(line_no) + ": steps not strictly increasing");
    out.push_back(r);
  }
  return out;
}

RunLog::RunLog(const std::filesystem::path& path, std::span<const StepRecord> prior)
    : out_(path, std::ios::out | std::ios::trunc | std::ios::binary) {
  if (!out_) throw std::runtime_error("RunLog: cannot open " + path.string());
  out_ << kRunLogHeader << '\n';
  out_.flush();
  for (const auto& r : prior) record_step(r);
}

void RunLog::record_step(const StepRecord& record) {
  if (!records_.empty() && record.step <= records_.back().step)
    throw std::invalid_argument("RunLog: step " + std::to_string(record.step) + " does not follow step " +
                                std::to_string(records_.back().step));
  validate_record(record);
  records_.push_back(record);
  if (out_.is_open()) {
    out_ << format_step_record(record) << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("RunLog: write failed");
  }
}

std::int64_t Histogram::total() const {
  std::int64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

int bin_index(double value, double lo, double hi, int n_bins) {
  if (!(hi > lo)) return 0;
  const double pos = (value - lo) / (hi - lo) * static_cast<double>(n_bins);
  if (!(pos >= 0.0)) return 0;
  return std::min(n_bins - 1, static_cast<int>(std::floor(pos)));
}

namespace {

std::vector<double> make_edges(int n_bins, double lo, double hi) {
  if (n_bins < 2) throw std::invalid_argument("histogram: n_bins must be >= 2");
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi < lo) throw std::invalid_argument("histogram: bad range");
  std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
  for (int k = 0; k <= n_bins; ++k) edges[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / n_bins;
  edges.back() = hi;
  return edges;
}

}  // namespace

Histogram vps_histogram(std::span<const VpsRecord> records, int n_bins, double lo, double hi) {
  if (records.empty()) throw std::invalid_argument("vps_histogram: empty snapshot");
  Histogram h;
  h.edges = make_edges(n_bins, lo, hi);
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (const auto& r : records) ++h.counts[static_cast<std::size_t>(bin_index(r.vps, lo, hi, n_bins))];
  return h;
}

Histogram vps_histogram(const VpsSnapshot& snapshot, int n_bins, const VpsWeights& weights) {
  return vps_histogram(snapshot.records, n_bins, 0.0, weights.max_vps());
}

std::int64_t TransitionMatrix::total() const {
  std::int64_t t = 0;
  for (const auto& row : counts)
    for (auto c : row) t += c;
  return t;
}

double TransitionMatrix::diagonal_fraction() const {
  const auto t = total();
  if (t == 0) return 0.0;
  std::int64_t diag = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) diag += counts[i][i];
  return static_cast<double>(diag) / static_cast<double>(t);
}

TransitionMatrix transition_matrix(const VpsSnapshot& from, const VpsSnapshot& to, int n_bins, double lo, double hi) {
  std::map<PromptId, double> later;
  for (const auto& r : to.records)
    if (!later.emplace(r.prompt_id, r.vps).second)
      throw std::invalid_argument("transition_matrix: duplicate prompt id in later snapshot");
  if (later.size() != from.records.size()) throw std::invalid_argument("transition_matrix: prompt id sets differ");
  TransitionMatrix m;
  m.bin_edges = make_edges(n_bins, lo, hi);
  m.from_step = from.step;
  m.to_step = to.step;
  m.counts.assign(static_cast<std::size_t>(n_bins), std::vector<std::int64_t>(static_cast<std::size_t>(n_bins), 0));
  std::map<PromptId, bool> seen;
  for (const auto& r : from.records) {
    const auto it = later.find(r.prompt_id);
    if (it == later.end()) throw std::invalid_argument("transition_matrix: prompt id sets differ");
    if (!seen.emplace(r.prompt_id, true).second)
      throw std::invalid_argument("transition_matrix: duplicate prompt id in earlier snapshot");
    const auto i = static_cast<std::size_t>(bin_index(r.vps, lo, hi, n_bins));
    const auto j = static_cast<std::size_t>(bin_index(it->second, lo, hi, n_bins));
    ++m.counts[i][j];
  }
  return m;
}

double validation_accuracy(const PolicySet& policies, const Corpus& corpus, int n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("validation_accuracy: n_samples must be >= 1");
  if (policies.size() != corpus.size()) throw std::invalid_argument("validation_accuracy: policy/corpus size mismatch");
  if (corpus.size() == 0) throw std::invalid_argument("validation_accuracy: empty corpus");
  long long hits = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    for (const auto& r : sample_rollouts(policies[i], corpus.prompts[i], n_samples, rng)) hits += r.reward;
  return static_cast<double>(hits) / (static_cast<double>(n_samples) * static_cast<double>(corpus.size()));
}

}  // namespace vas
