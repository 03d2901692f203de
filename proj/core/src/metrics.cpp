#include "finkey/metrics.hpp"

#include "finkey/errors.hpp"

namespace finkey {

EntityMetrics EntityMetrics::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EntityMetrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  const auto t = static_cast<double>(tp);
  m.precision = tp + fp > 0 ? t / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? t / static_cast<double>(tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double accuracy(std::span<const SentimentLabel> preds, std::span<const SentimentLabel> golds) {
  if (preds.size() != golds.size()) throw ConfigError("accuracy: length mismatch");
  if (preds.empty()) throw ConfigError("accuracy: no predictions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == golds[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

EntityMetrics entity_prf(std::span<const EntitySet> preds, std::span<const EntitySet> golds) {
  if (preds.size() != golds.size()) throw ConfigError("entity_prf: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t hit = 0;
    for (const auto& e : preds[i]) hit += golds[i].count(e);
    tp += hit;
    fp += preds[i].size() - hit;
    fn += golds[i].size() - hit;
  }
  return EntityMetrics::from_counts(tp, fp, fn);
}

double exact_match(std::span<const std::string> preds, std::span<const std::string> golds) {
  if (preds.size() != golds.size()) throw ConfigError("exact_match: length mismatch");
  if (preds.empty()) throw ConfigError("exact_match: no predictions");
  std::size_t same = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) same += preds[i] == golds[i];
  return static_cast<double>(same) / static_cast<double>(preds.size());
}

}  // namespace finkey
