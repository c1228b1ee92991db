// SPDX-License-Identifier: Apache-2.0
#include "vas/corpus.hpp"

#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vas {

namespace {

// True when V^T >= A, computed without overflow.
bool power_at_least(int base, int exponent, int target) {
  long long acc = 1;
  for (int i = 0; i < exponent; ++i) {
    acc *= base;
    if (acc >= target) return true;
  }
  return acc >= target;
}

}  // namespace

Corpus generate_corpus(int n_prompts, int vocab_size, int seq_len, int answer_space,
                       const DifficultySpec& difficulty, std::uint64_t seed) {
  if (n_prompts < 0) throw std::invalid_argument("generate_corpus: n_prompts must be >= 0");
  if (vocab_size < 2) throw std::invalid_argument("generate_corpus: vocab_size must be >= 2");
  if (seq_len < 1) throw std::invalid_argument("generate_corpus: seq_len must be >= 1");
  if (answer_space < 2) throw std::invalid_argument("generate_corpus: answer_space must be >= 2");
  if (!power_at_least(vocab_size, seq_len, answer_space))
    throw std::invalid_argument("generate_corpus: answer_space exceeds vocab_size^seq_len");
  if (difficulty.bias_hi < difficulty.bias_lo)
    throw std::invalid_argument("generate_corpus: bias_hi < bias_lo");
  if (!(difficulty.verifier_noise >= 0.0 && difficulty.verifier_noise <= 0.5))
    throw std::invalid_argument("generate_corpus: verifier_noise must lie in [0, 0.5]");

  Rng rng(seed);
  Corpus corpus;
  corpus.vocab_size = vocab_size;
  corpus.seq_len = seq_len;
  corpus.prompts.reserve(static_cast<std::size_t>(n_prompts));
  for (int i = 0; i < n_prompts; ++i) {
    Prompt p;
    p.id = i;
    p.answer_space_size = answer_space;
    p.target_answer = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(answer_space)));
    const double u = uniform01(rng);
    p.difficulty_bias = difficulty.bias_lo + (difficulty.bias_hi - difficulty.bias_lo) * u;
    p.verifier_noise = difficulty.verifier_noise;
    corpus.prompts.push_back(p);
  }
  return corpus;
}

int answer_map(std::span<const Token> tokens, const Prompt& prompt) {
  const long long sum = std::accumulate(tokens.begin(), tokens.end(), 0LL);
  return static_cast<int>(sum % prompt.answer_space_size);
}

int verify(const Prompt& prompt, int answer, Rng& rng) {
  const int chain_correct = answer == prompt.target_answer ? 1 : 0;
  if (prompt.verifier_noise <= 0.0) return chain_correct;
  return bernoulli(rng, prompt.verifier_noise) ? 1 - chain_correct : chain_correct;
}

std::string corpus_to_json(const Corpus& corpus) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : corpus.prompts) {
    nlohmann::ordered_json o;
    o["id"] = p.id;
    o["A"] = p.answer_space_size;
    o["target"] = p.target_answer;
    o["bias"] = p.difficulty_bias;
    o["rho"] = p.verifier_noise;
    arr.push_back(std::move(o));
  }
  return arr.dump(2);
}

Corpus corpus_from_json(const std::string& text, int vocab_size, int seq_len) {
  const auto arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw std::invalid_argument("corpus_from_json: expected a JSON array");
  Corpus corpus;
  corpus.vocab_size = vocab_size;
  corpus.seq_len = seq_len;
  for (const auto& o : arr) {
    Prompt p;
    p.id = o.at("id").get<PromptId>();
    p.answer_space_size = o.at("A").get<int>();
    p.target_answer = o.at("target").get<int>();
    p.difficulty_bias = o.at("bias").get<double>();
    p.verifier_noise = o.at("rho").get<double>();
    if (p.target_answer < 0 || p.target_answer >= p.answer_space_size)
      throw std::invalid_argument("corpus_from_json: target outside answer space");
    if (!(p.verifier_noise >= 0.0 && p.verifier_noise <= 0.5))
      throw std::invalid_argument("corpus_from_json: rho outside [0, 0.5]");
    corpus.prompts.push_back(p);
  }
  return corpus;
}

}  // namespace vas
