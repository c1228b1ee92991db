// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vas/rng.hpp"

namespace vas {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;
using PromptId = std::int64_t;

/// One synthetic task instance. The chain-to-answer map is fixed (token sum mod A);
/// difficulty only enters through policy initialization.
struct Prompt {
  PromptId id = 0;
  int answer_space_size = 2;
  int target_answer = 0;
  double difficulty_bias = 0.0;
  double verifier_noise = 0.0;  // probability the verdict is flipped

  bool operator==(const Prompt&) const = default;
};

/// A sampled trajectory, its extracted answer and its verdict.
struct Rollout {
  TokenSeq tokens;
  int answer = 0;
  int reward = 0;
};

/// Distribution of per-prompt difficulty: bias ~ U[bias_lo, bias_hi] (constant when equal).
struct DifficultySpec {
  double bias_lo = 0.0;
  double bias_hi = 0.0;
  double verifier_noise = 0.0;
};

struct Corpus {
  int vocab_size = 2;
  int seq_len = 1;
  std::vector<Prompt> prompts;

  std::size_t size() const { return prompts.size(); }
  bool operator==(const Corpus&) const = default;
};

/// Builds n_prompts prompts with ids 0..n-1. Throws std::invalid_argument when the
/// answer space cannot be covered by V^T trajectories or parameters are out of range.
Corpus generate_corpus(int n_prompts, int vocab_size, int seq_len, int answer_space,
                       const DifficultySpec& difficulty, std::uint64_t seed);

/// (sum of tokens) mod A.
int answer_map(std::span<const Token> tokens, const Prompt& prompt);

/// Binary verdict for an extracted answer; flipped with probability verifier_noise.
int verify(const Prompt& prompt, int answer, Rng& rng);
inline int verify(const Prompt& prompt, const Rollout& rollout, Rng& rng) {
  return verify(prompt, rollout.answer, rng);
}

/// Probability that verify() returns 1 for a chain with the given answer.
inline double success_probability(const Prompt& prompt, int answer) {
  return answer == prompt.target_answer ? 1.0 - prompt.verifier_noise : prompt.verifier_noise;
}

/// JSON array of {id, A, target, bias, rho} in that field order.
std::string corpus_to_json(const Corpus& corpus);
/// Inverse of corpus_to_json; vocab_size and seq_len are not part of the file format.
Corpus corpus_from_json(const std::string& text, int vocab_size, int seq_len);

}  // namespace vas
