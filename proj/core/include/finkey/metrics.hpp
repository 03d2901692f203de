#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "finkey/corpus.hpp"

namespace finkey {

/// Entity counts summed over texts with the derived precision, recall, F1.
/// Zero denominators give 0.
struct EntityMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  static EntityMetrics from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

using EntitySet = std::set<std::string>;

/// Fraction of positions where prediction and gold agree. Throws
/// ConfigError on length mismatch or empty input.
double accuracy(std::span<const SentimentLabel> preds, std::span<const SentimentLabel> golds);

/// Per text: TP = |pred & gold|, FP = |pred - gold|, FN = |gold - pred|;
/// counts are summed before computing P, R, F1.
EntityMetrics entity_prf(std::span<const EntitySet> preds, std::span<const EntitySet> golds);

/// Fraction of positions with identical strings.
double exact_match(std::span<const std::string> preds, std::span<const std::string> golds);

}  // namespace finkey
