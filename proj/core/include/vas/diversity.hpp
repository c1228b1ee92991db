// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>

#include "vas/corpus.hpp"

namespace vas {

enum class DiversityMetric { inv_self_bleu_123, distinct_n, edit_distance_ustat };

std::string_view to_string(DiversityMetric metric);
/// Throws std::invalid_argument on unknown names.
DiversityMetric parse_diversity_metric(std::string_view name);

struct DiversityConfig {
  DiversityMetric metric = DiversityMetric::inv_self_bleu_123;
  int ngram_max = 3;
};

/// Mean over i of BLEU(y_i; {y_j : j != i}) with uniform weights over n = 1..ngram_max,
/// clipped n-gram precision and brevity penalty. Each precision enters the log as
/// log(p + 1e-9); a candidate with no unigram match scores exactly 0. Orders longer than the
/// candidate are dropped and the weights renormalized over the rest. Scores are capped at 1.
double self_bleu(std::span<const TokenSeq> rollouts, int ngram_max);

/// Unique n-grams across all rollouts divided by total n-gram occurrences.
double distinct_n(std::span<const TokenSeq> rollouts, int n);

/// Levenshtein(a, b) / max(|a|, |b|); 0 when both are empty.
double norm_edit_distance(std::span<const Token> a, std::span<const Token> b);

/// 1/(K(K-1)) * sum_{i != j} d(y_i, y_j)^2 with d = norm_edit_distance.
double tds_ustat(std::span<const TokenSeq> rollouts);

/// Trajectory diversity score in [0, 1]; zero for identical rollouts under every metric.
double tds(std::span<const TokenSeq> rollouts, const DiversityConfig& config);

}  // namespace vas
