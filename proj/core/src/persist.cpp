// SPDX-License-Identifier: Apache-2.0
#include "vas/persist.hpp"

#include <openssl/sha.h>

#include <array>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

namespace vas {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * digest.size());
  for (unsigned char c : digest) {
    out += kHex[c >> 4];
    out += kHex[c & 0xF];
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& file_names) {
  nlohmann::ordered_json files = nlohmann::ordered_json::array();
  for (const auto& name : file_names) {
    const auto content = read_text_file(dir / name);
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["bytes"] = content.size();
    entry["sha256"] = sha256_hex(content);
    files.push_back(std::move(entry));
  }
  nlohmann::ordered_json manifest;
  manifest["files"] = std::move(files);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string checkpoint_to_json(const Checkpoint& c) {
  nlohmann::ordered_json j;
  j["step"] = c.step;
  auto& policies = j["policies"] = nlohmann::ordered_json::array();
  for (const auto& p : c.policies) {
    nlohmann::ordered_json o;
    o["vocab_size"] = p.vocab_size();
    o["seq_len"] = p.seq_len();
    o["logits"] = std::vector<double>(p.logits().begin(), p.logits().end());
    policies.push_back(std::move(o));
  }
  auto& records = j["vps"] = nlohmann::ordered_json::array();
  for (const auto& r : c.vps_records) {
    nlohmann::ordered_json o;
    o["prompt_id"] = r.prompt_id;
    o["pass_rate"] = r.pass_rate;
    o["ovs"] = r.ovs;
    o["tds"] = r.tds;
    o["vps"] = r.vps;
    o["last_refresh_step"] = r.last_refresh_step;
    o["n_rollouts_used"] = r.n_rollouts_used;
    records.push_back(std::move(o));
  }
  auto& rngs = j["rng_states"] = nlohmann::ordered_json::object();
  for (const auto& [name, state] : c.rng_states) rngs[name] = state;
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Checkpoint c;
    c.step = j.at("step").get<std::int64_t>();
    for (const auto& o : j.at("policies"))
      c.policies.emplace_back(o.at("vocab_size").get<int>(), o.at("seq_len").get<int>(),
                              o.at("logits").get<std::vector<double>>());
    for (const auto& o : j.at("vps")) {
      VpsRecord r;
      r.prompt_id = o.at("prompt_id").get<PromptId>();
      r.pass_rate = o.at("pass_rate").get<double>();
      r.ovs = o.at("ovs").get<double>();
      r.tds = o.at("tds").get<double>();
      r.vps = o.at("vps").get<double>();
      r.last_refresh_step = o.at("last_refresh_step").get<std::int64_t>();
      r.n_rollouts_used = o.at("n_rollouts_used").get<int>();
      c.vps_records.push_back(r);
    }
    for (const auto& [name, state] : j.at("rng_states").items()) c.rng_states[name] = state.get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace vas
