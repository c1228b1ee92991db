// SPDX-License-Identifier: Apache-2.0
#include "vas/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vas {

namespace {

constexpr double kLogEpsilon = 1e-9;

using NGram = std::span<const Token>;

bool ngram_less(NGram a, NGram b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool ngram_equal(NGram a, NGram b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

// Sorted (n-gram, count) pairs of one sequence; views point into the sequence.
using NGramCounts = std::vector<std::pair<NGram, int>>;

NGramCounts count_ngrams(const TokenSeq& seq, int n) {
  NGramCounts out;
  const auto un = static_cast<std::size_t>(n);
  if (seq.size() < un) return out;
  std::vector<NGram> grams;
  grams.reserve(seq.size() - un + 1);
  for (std::size_t i = 0; i + un <= seq.size(); ++i) grams.emplace_back(seq.data() + i, un);
  std::sort(grams.begin(), grams.end(), ngram_less);
  for (const auto& g : grams) {
    if (!out.empty() && ngram_equal(out.back().first, g))
      ++out.back().second;
    else
      out.emplace_back(g, 1);
  }
  return out;
}

int lookup(const NGramCounts& counts, NGram g) {
  auto it = std::lower_bound(counts.begin(), counts.end(), g,
                             [](const auto& entry, NGram key) { return ngram_less(entry.first, key); });
  return (it != counts.end() && ngram_equal(it->first, g)) ? it->second : 0;
}

double sentence_bleu(std::size_t cand, std::span<const TokenSeq> rollouts,
                     const std::vector<std::vector<NGramCounts>>& counts, int ngram_max) {
  const std::size_t c_len = rollouts[cand].size();
  double log_sum = 0.0;
  int orders = 0;  // orders the candidate is long enough to contain
  for (int n = 1; n <= ngram_max; ++n) {
    const auto& cand_counts = counts[cand][static_cast<std::size_t>(n - 1)];
    long long clipped = 0;
    long long total = 0;
    for (const auto& [gram, cnt] : cand_counts) {
      int max_ref = 0;
      for (std::size_t r = 0; r < rollouts.size() && max_ref < cnt; ++r) {
        if (r == cand) continue;
        max_ref = std::max(max_ref, lookup(counts[r][static_cast<std::size_t>(n - 1)], gram));
      }
      clipped += std::min(cnt, max_ref);
      total += cnt;
    }
    if (n == 1 && clipped == 0) return 0.0;
    if (total == 0) continue;
    log_sum += std::log(static_cast<double>(clipped) / static_cast<double>(total) + kLogEpsilon);
    ++orders;
  }
  if (orders > 0) log_sum /= orders;

  // Brevity penalty against the closest reference length (shorter wins ties).
  std::size_t best_len = 0;
  long long best_diff = -1;
  for (std::size_t r = 0; r < rollouts.size(); ++r) {
    if (r == cand) continue;
    const long long len = static_cast<long long>(rollouts[r].size());
    const long long diff = std::llabs(len - static_cast<long long>(c_len));
    if (best_diff < 0 || diff < best_diff || (diff == best_diff && static_cast<std::size_t>(len) < best_len)) {
      best_diff = diff;
      best_len = static_cast<std::size_t>(len);
    }
  }
  double bp = 1.0;
  if (c_len == 0)
    bp = 0.0;
  else if (c_len <= best_len)
    bp = std::exp(1.0 - static_cast<double>(best_len) / static_cast<double>(c_len));
  return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

// (unique n-gram types, total n-gram occurrences) pooled over all rollouts.
std::pair<std::size_t, std::size_t> ngram_type_counts(std::span<const TokenSeq> rollouts, int n) {
  if (rollouts.empty()) throw std::invalid_argument("distinct_n: need at least 1 rollout");
  if (n < 1) throw std::invalid_argument("distinct_n: n must be >= 1");
  std::vector<NGram> grams;
  for (const auto& seq : rollouts) {
    if (seq.size() < static_cast<std::size_t>(n)) throw std::invalid_argument("distinct_n: sequence shorter than n");
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i)
      grams.emplace_back(seq.data() + i, static_cast<std::size_t>(n));
  }
  const std::size_t total = grams.size();
  std::sort(grams.begin(), grams.end(), ngram_less);
  const auto unique = static_cast<std::size_t>(std::unique(grams.begin(), grams.end(), ngram_equal) - grams.begin());
  return {unique, total};
}

}  // namespace

std::string_view to_string(DiversityMetric metric) {
  switch (metric) {
    case DiversityMetric::inv_self_bleu_123: return "inv_self_bleu_123";
    case DiversityMetric::distinct_n: return "distinct_n";
    case DiversityMetric::edit_distance_ustat: return "edit_distance_ustat";
  }
  return "unknown";
}

DiversityMetric parse_diversity_metric(std::string_view name) {
  if (name == "inv_self_bleu_123") return DiversityMetric::inv_self_bleu_123;
  if (name == "distinct_n") return DiversityMetric::distinct_n;
  if (name == "edit_distance_ustat") return DiversityMetric::edit_distance_ustat;
  throw std::invalid_argument("unknown diversity metric: " + std::string(name));
}

double self_bleu(std::span<const TokenSeq> rollouts, int ngram_max) {
  if (rollouts.size() < 2) throw std::invalid_argument("self_bleu: need at least 2 rollouts");
  if (ngram_max < 1) throw std::invalid_argument("self_bleu: ngram_max must be >= 1");
  std::vector<std::vector<NGramCounts>> counts(rollouts.size());
  for (std::size_t i = 0; i < rollouts.size(); ++i)
    for (int n = 1; n <= ngram_max; ++n) counts[i].push_back(count_ngrams(rollouts[i], n));
  double sum = 0.0;
  for (std::size_t i = 0; i < rollouts.size(); ++i) sum += sentence_bleu(i, rollouts, counts, ngram_max);
  return sum / static_cast<double>(rollouts.size());
}

double distinct_n(std::span<const TokenSeq> rollouts, int n) {
  const auto [unique, total] = ngram_type_counts(rollouts, n);
  return static_cast<double>(unique) / static_cast<double>(total);
}

double norm_edit_distance(std::span<const Token> a, std::span<const Token> b) {
  if (a.empty() && b.empty()) return 0.0;
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

double tds_ustat(std::span<const TokenSeq> rollouts) {
  const std::size_t k = rollouts.size();
  if (k < 2) throw std::invalid_argument("tds_ustat: need at least 2 rollouts");
  // Distances are computed once per unordered pair, then summed in ordered-pair order.
  std::vector<double> d2(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const double d = norm_edit_distance(rollouts[i], rollouts[j]);
      d2[i * k + j] = d2[j * k + i] = d * d;
    }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (i != j) sum += d2[i * k + j];
  return sum / static_cast<double>(k * (k - 1));
}

double tds(std::span<const TokenSeq> rollouts, const DiversityConfig& config) {
  if (rollouts.size() < 2) throw std::invalid_argument("tds: need at least 2 rollouts");
  if (config.ngram_max < 1) throw std::invalid_argument("tds: ngram_max must be >= 1");
  switch (config.metric) {
    case DiversityMetric::inv_self_bleu_123:
      return 1.0 - self_bleu(rollouts, 3);
    case DiversityMetric::edit_distance_ustat:
      return tds_ustat(rollouts);
    case DiversityMetric::distinct_n: {
      // Pooled distinct-n rescaled so that K copies of one rollout score 0 and
      // all-unique n-grams score 1: (U_pool - mean_i U_i) / (total - mean_i U_i).
      double acc = 0.0;
      for (int n = 1; n <= config.ngram_max; ++n) {
        const auto [pooled_unique, total] = ngram_type_counts(rollouts, n);
        std::size_t own_unique_sum = 0;
        for (const auto& seq : rollouts)
          own_unique_sum += ngram_type_counts(std::span<const TokenSeq>(&seq, 1), n).first;
        const double own_unique = static_cast<double>(own_unique_sum) / static_cast<double>(rollouts.size());
        acc += (static_cast<double>(pooled_unique) - own_unique) / (static_cast<double>(total) - own_unique);
      }
      return std::clamp(acc / config.ngram_max, 0.0, 1.0);
    }
  }
  throw std::invalid_argument("tds: unknown metric");
}

}  // namespace vas
