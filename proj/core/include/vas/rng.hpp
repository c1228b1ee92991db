// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace vas {

/// Engine used for every random stream in the library.
using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream of a master seed.
/// Changing how much one stream consumes never perturbs another.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream_name);

inline Rng make_stream(std::uint64_t master_seed, std::string_view stream_name) {
  return Rng(derive_seed(master_seed, stream_name));
}

/// Uniform double in [0, 1) built from the top 53 bits; identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Bernoulli(p) draw.
inline bool bernoulli(Rng& rng, double p) {
  return uniform01(rng) < p;
}

/// Serialized engine state (text form of the standard operator<<).
std::string save_state(const Rng& rng);
void restore_state(Rng& rng, const std::string& state);

}  // namespace vas
