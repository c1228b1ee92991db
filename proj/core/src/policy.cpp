// SPDX-License-Identifier: Apache-2.0
#include "vas/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace vas {

namespace {

constexpr int kAnchorAttempts = 256;

void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    out[v] = std::exp(logits[v] - mx);
    z += out[v];
  }
  for (double& p : out) p /= z;
}

void check_tokens(const PolicyParams& params, std::span<const Token> tokens) {
  if (tokens.size() != static_cast<std::size_t>(params.seq_len()))
    throw std::invalid_argument("policy: token sequence length differs from seq_len");
  for (Token tok : tokens)
    if (tok < 0 || tok >= params.vocab_size())
      throw std::invalid_argument("policy: token outside vocabulary");
}

// Inverse-CDF draw from one probability row.
Token draw_token(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t v = 0; v + 1 < probs.size(); ++v) {
    acc += probs[v];
    if (u < acc) return static_cast<Token>(v);
  }
  return static_cast<Token>(probs.size() - 1);
}

}  // namespace

PolicyParams::PolicyParams(int vocab_size, int seq_len)
    : PolicyParams(vocab_size, seq_len,
                   std::vector<double>(static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(seq_len), 0.0)) {}

PolicyParams::PolicyParams(int vocab_size, int seq_len, std::vector<double> logits)
    : vocab_size_(vocab_size), seq_len_(seq_len), logits_(std::move(logits)) {
  if (vocab_size < 2 || seq_len < 1) throw std::invalid_argument("PolicyParams: need V >= 2 and T >= 1");
  if (logits_.size() != static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(seq_len))
    throw std::invalid_argument("PolicyParams: logits size must equal V*T");
  for (double l : logits_)
    if (!std::isfinite(l)) throw std::invalid_argument("PolicyParams: non-finite logit");
}

std::vector<double> PolicyParams::probabilities() const {
  std::vector<double> probs(logits_.size());
  const auto v = static_cast<std::size_t>(vocab_size_);
  for (int t = 0; t < seq_len_; ++t)
    softmax_row(row(t), std::span<double>(probs.data() + static_cast<std::size_t>(t) * v, v));
  return probs;
}

PolicySet init_policy(const Corpus& corpus, double base_scale, std::uint64_t seed) {
  if (!(base_scale >= 0.0)) throw std::invalid_argument("init_policy: base_scale must be >= 0");
  const int V = corpus.vocab_size;
  const int T = corpus.seq_len;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  PolicySet policies;
  policies.reserve(corpus.size());
  for (const auto& prompt : corpus.prompts) {
    PolicyParams params(V, T);
    for (double& l : params.logits()) l = base_scale * normal(rng);

    // Anchor chain: random prefix, last token chosen so the chain answers wrongly when
    // bias >= 0 and correctly when bias < 0. Every other token is shifted by -|bias|.
    const bool toward_correct = prompt.difficulty_bias < 0.0;
    // A correct completion may not exist for a given prefix (or at all when the target
    // exceeds every reachable token sum), so the prefix is redrawn a bounded number of times.
    TokenSeq anchor(static_cast<std::size_t>(T));
    std::vector<Token> last_choices;
    for (int attempt = 0; last_choices.empty() && attempt < kAnchorAttempts; ++attempt) {
      long long prefix = 0;
      for (int t = 0; t + 1 < T; ++t) {
        anchor[static_cast<std::size_t>(t)] = static_cast<Token>(uniform_index(rng, static_cast<std::uint64_t>(V)));
        prefix += anchor[static_cast<std::size_t>(t)];
      }
      for (Token v = 0; v < V; ++v)
        if (((prefix + v) % prompt.answer_space_size == prompt.target_answer) == toward_correct)
          last_choices.push_back(v);
    }
    if (last_choices.empty()) throw std::invalid_argument("init_policy: target answer unreachable by any chain");
    anchor.back() = last_choices[uniform_index(rng, last_choices.size())];

    const double shift = std::abs(prompt.difficulty_bias);
    for (int t = 0; t < T; ++t)
      for (int v = 0; v < V; ++v)
        if (v != anchor[static_cast<std::size_t>(t)]) params.logit(t, v) -= shift;
    policies.push_back(std::move(params));
  }
  return policies;
}

PolicyParams concentrated_policy(int vocab_size, const TokenSeq& tokens, double margin) {
  PolicyParams params(vocab_size, static_cast<int>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) params.logit(static_cast<int>(t), tokens[t]) = margin;
  return params;
}

std::vector<TokenSeq> sample(const PolicyParams& params, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const auto probs = params.probabilities();
  const auto V = static_cast<std::size_t>(params.vocab_size());
  std::vector<TokenSeq> out(static_cast<std::size_t>(n), TokenSeq(static_cast<std::size_t>(params.seq_len())));
  for (auto& seq : out)
    for (std::size_t t = 0; t < seq.size(); ++t)
      seq[t] = draw_token(std::span<const double>(probs.data() + t * V, V), rng);
  return out;
}

std::vector<Rollout> sample_rollouts(const PolicyParams& params, const Prompt& prompt, int n, Rng& rng) {
  auto seqs = sample(params, n, rng);
  std::vector<Rollout> out;
  out.reserve(seqs.size());
  for (auto& s : seqs) {
    Rollout r;
    r.tokens = std::move(s);
    r.answer = answer_map(r.tokens, prompt);
    r.reward = verify(prompt, r.answer, rng);
    out.push_back(std::move(r));
  }
  return out;
}

double log_prob(const PolicyParams& params, std::span<const Token> tokens) {
  check_tokens(params, tokens);
  double lp = 0.0;
  for (int t = 0; t < params.seq_len(); ++t) {
    const auto r = params.row(t);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double l : r) z += std::exp(l - mx);
    lp += r[static_cast<std::size_t>(tokens[static_cast<std::size_t>(t)])] - mx - std::log(z);
  }
  return lp;
}

void accumulate_score(std::span<const double> probs, int vocab_size, std::span<const Token> tokens,
                      double weight, std::span<double> out) {
  const auto V = static_cast<std::size_t>(vocab_size);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::size_t base = t * V;
    for (std::size_t v = 0; v < V; ++v) out[base + v] -= weight * probs[base + v];
    out[base + static_cast<std::size_t>(tokens[t])] += weight;
  }
}

GradientVector score(const PolicyParams& params, std::span<const Token> tokens) {
  check_tokens(params, tokens);
  GradientVector g(params.dim(), 0.0);
  accumulate_score(params.probabilities(), params.vocab_size(), tokens, 1.0, g);
  return g;
}

std::uint64_t trajectory_count(int vocab_size, int seq_len) {
  std::uint64_t n = 1;
  for (int t = 0; t < seq_len; ++t) {
    if (n > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(vocab_size))
      return std::numeric_limits<std::uint64_t>::max();
    n *= static_cast<std::uint64_t>(vocab_size);
  }
  return n;
}

void for_each_trajectory(const PolicyParams& params, std::uint64_t cap,
                         const std::function<void(std::span<const Token>, double)>& fn) {
  const int V = params.vocab_size();
  const int T = params.seq_len();
  if (trajectory_count(V, T) > cap)
    throw EnumerationLimitError("enumeration: V^T exceeds the enumeration cap");
  const auto probs = params.probabilities();
  const auto Vs = static_cast<std::size_t>(V);

  // Odometer over token sequences with prefix products cached per position.
  TokenSeq tokens(static_cast<std::size_t>(T), 0);
  std::vector<double> prefix(static_cast<std::size_t>(T) + 1, 1.0);
  for (int t = 0; t < T; ++t)
    prefix[static_cast<std::size_t>(t) + 1] = prefix[static_cast<std::size_t>(t)] * probs[static_cast<std::size_t>(t) * Vs];
  while (true) {
    fn(tokens, prefix.back());
    int t = T - 1;
    while (t >= 0 && tokens[static_cast<std::size_t>(t)] == V - 1) {
      tokens[static_cast<std::size_t>(t)] = 0;
      --t;
    }
    if (t < 0) break;
    ++tokens[static_cast<std::size_t>(t)];
    for (int s = t; s < T; ++s) {
      const auto su = static_cast<std::size_t>(s);
      prefix[su + 1] = prefix[su] * probs[su * Vs + static_cast<std::size_t>(tokens[su])];
    }
  }
}

ExactStats enumerate_exact(const PolicyParams& params, const Prompt& prompt, const EnumerationOptions& options) {
  const std::size_t d = params.dim();
  const auto probs = params.probabilities();
  ExactStats st;
  st.mean_score.assign(d, 0.0);
  st.true_gradient.assign(d, 0.0);
  if (options.with_fisher) st.fisher.assign(d * d, 0.0);
  GradientVector g(d);

  for_each_trajectory(params, options.cap, [&](std::span<const Token> tokens, double pi) {
    const double p_success = success_probability(prompt, answer_map(tokens, prompt));
    st.total_probability += pi;
    st.pass_rate += pi * p_success;
    st.second_moment += pi * p_success;  // R in {0,1}: E[R^2 | y] = E[R | y]
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_score(probs, params.vocab_size(), tokens, 1.0, g);
    for (std::size_t i = 0; i < d; ++i) {
      st.mean_score[i] += pi * g[i];
      st.true_gradient[i] += pi * p_success * g[i];
    }
    if (options.with_fisher) {
      for (std::size_t i = 0; i < d; ++i) {
        const double gi = pi * g[i];
        if (gi == 0.0) continue;
        double* rowp = st.fisher.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) rowp[j] += gi * g[j];
      }
    }
  });
  st.reward_variance = std::max(0.0, st.second_moment - st.pass_rate * st.pass_rate);
  return st;
}

double exact_pass_rate(const PolicyParams& params, const Prompt& prompt, std::uint64_t cap) {
  double p = 0.0;
  for_each_trajectory(params, cap, [&](std::span<const Token> tokens, double pi) {
    p += pi * success_probability(prompt, answer_map(tokens, prompt));
  });
  return p;
}

}  // namespace vas
