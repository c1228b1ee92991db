// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vas/policy.hpp"
#include "vas/vps.hpp"

namespace vas {

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// manifest.json: {"files": [{"name", "bytes", "sha256"}, ...]} in the given order.
void write_manifest(const std::filesystem::path& dir, const std::vector<std::string>& file_names);

/// Everything needed to continue a training run after `step`.
struct Checkpoint {
  std::int64_t step = 0;
  PolicySet policies;
  std::vector<VpsRecord> vps_records;
  std::map<std::string, std::string> rng_states;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint);
/// Throws std::invalid_argument on malformed input.
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace vas
