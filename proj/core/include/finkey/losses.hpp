#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace finkey {

/// Focal-loss shape: loss = -alpha_t (1 - p_t)^gamma log(p_t), where alpha_t
/// is alpha for positives and 1 - alpha for negatives (1 for both if unset).
struct FocalConfig {
  double gamma = 2.0;
  std::optional<double> alpha;

  void validate() const;
  bool operator==(const FocalConfig&) const = default;
};

struct VectorLoss {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

struct ScalarLoss {
  double loss = 0.0;
  double d_logit = 0.0;
};

/// -log softmax(logits)[gold], gradient softmax - onehot(gold).
VectorLoss cross_entropy(std::span<const double> logits, std::size_t gold);

/// -log p_t for a probability; `y` is 0 or 1.
double binary_cross_entropy(double p, int y);

/// Binary cross-entropy of sigmoid(logit), computed without forming p.
ScalarLoss binary_cross_entropy_logit(double logit, int y);

double focal_loss(double p, int y, const FocalConfig& cfg);

/// Focal loss of sigmoid(logit) with its derivative w.r.t. the logit.
ScalarLoss focal_loss_logit(double logit, int y, const FocalConfig& cfg);

struct SpanLoss {
  double loss = 0.0;
  std::vector<double> d_start;
  std::vector<double> d_end;
};

/// Mean of the start and end cross-entropies, each normalised over the
/// positions flagged in `valid` only. Gradients are zero elsewhere.
SpanLoss span_loss(std::span<const double> start_scores, std::span<const double> end_scores,
                   std::span<const std::uint8_t> valid, std::size_t gold_start,
                   std::size_t gold_end);

double sigmoid(double x);

}  // namespace finkey
