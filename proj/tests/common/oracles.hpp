#pragma once

// Slow reference implementations the library results are compared with.

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "finkey/ensemble.hpp"
#include "finkey/metrics.hpp"
#include "finkey/rng.hpp"
#include "finkey/tasks.hpp"

namespace oracle {

// Enumerates every admissible (i, j), then sorts by score descending,
// i ascending, j ascending.
inline std::optional<std::pair<std::size_t, std::size_t>> span(const std::vector<double>& start,
                                                               const std::vector<double>& end,
                                                               const std::vector<std::uint8_t>& valid,
                                                               std::size_t max_span_len) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < start.size(); ++i) {
    for (std::size_t j = 0; j < end.size(); ++j) {
      if (!valid[i] || !valid[j] || j < i || j - i + 1 > max_span_len) continue;
      all.emplace_back(start[i] + end[j], i, j);
    }
  }
  if (all.empty()) return std::nullopt;
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  return std::pair{std::get<1>(all.front()), std::get<2>(all.front())};
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
};

// Set algebra per text, then P = TP/(TP+FP), R = TP/(TP+FN),
// F1 = 2PR/(P+R), each 0 when its denominator is 0.
inline Counts prf(const std::vector<finkey::EntitySet>& preds, const std::vector<finkey::EntitySet>& golds) {
  Counts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::vector<std::string> inter, only_pred, only_gold;
    std::set_intersection(preds[i].begin(), preds[i].end(), golds[i].begin(), golds[i].end(),
                          std::back_inserter(inter));
    std::set_difference(preds[i].begin(), preds[i].end(), golds[i].begin(), golds[i].end(),
                        std::back_inserter(only_pred));
    std::set_difference(golds[i].begin(), golds[i].end(), preds[i].begin(), preds[i].end(),
                        std::back_inserter(only_gold));
    c.tp += inter.size();
    c.fp += only_pred.size();
    c.fn += only_gold.size();
  }
  const double tp = static_cast<double>(c.tp);
  if (c.tp + c.fp) c.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn) c.recall = tp / static_cast<double>(c.tp + c.fn);
  if (c.precision + c.recall > 0) c.f1 = 2 * c.precision * c.recall / (c.precision + c.recall);
  return c;
}

// Counts labels one by one; a tie looks at the mean probability.
inline finkey::SentimentLabel vote(const std::vector<finkey::SentimentPrediction>& members) {
  int negative = 0, positive = 0;
  double total = 0;
  for (const auto& m : members) {
    if (m.label == finkey::SentimentLabel::Negative) ++negative;
    else ++positive;
    total += m.prob_negative;
  }
  if (negative != positive)
    return negative > positive ? finkey::SentimentLabel::Negative : finkey::SentimentLabel::Positive;
  return total / static_cast<double>(members.size()) >= 0.5 ? finkey::SentimentLabel::Negative
                                                             : finkey::SentimentLabel::Positive;
}

// Random entity sets drawn from a small pool, so overlaps are common and
// empty sets appear.
inline finkey::EntitySet random_set(finkey::Rng& rng, std::size_t pool = 6) {
  finkey::EntitySet s;
  const std::size_t n = rng.below(pool);
  for (std::size_t i = 0; i < n; ++i) s.insert("e" + std::to_string(rng.below(pool)));
  return s;
}

// Random members; probabilities on a coarse grid so exact 0.5 means happen.
inline std::vector<finkey::SentimentPrediction> random_members(finkey::Rng& rng, std::size_t max_members = 10) {
  std::vector<finkey::SentimentPrediction> out(1 + rng.below(max_members));
  for (auto& m : out) {
    m.prob_negative = static_cast<double>(rng.below(11)) / 10.0;
    m.label = m.prob_negative >= 0.5 ? finkey::SentimentLabel::Negative : finkey::SentimentLabel::Positive;
  }
  return out;
}

}  // namespace oracle
