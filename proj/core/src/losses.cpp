#include "finkey/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finkey/errors.hpp"

namespace finkey {

namespace {

// log(1 + exp(x))
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

VectorLoss masked_cross_entropy(std::span<const double> scores, std::span<const std::uint8_t> valid,
                                std::size_t gold) {
  VectorLoss out;
  out.grad.assign(scores.size(), 0.0);
  std::size_t arg = gold;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (valid[i] && scores[i] > scores[arg]) arg = i;
  const double max = scores[arg];
  // log-sum-exp as max + log1p(rest) keeps tiny losses accurate
  double rest = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (valid[i] && i != arg) rest += std::exp(scores[i] - max);
  const double log_z_minus_max = std::log1p(rest);
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (valid[i]) out.grad[i] = std::exp(scores[i] - max - log_z_minus_max);
  out.loss = (max - scores[gold]) + log_z_minus_max;
  out.grad[gold] -= 1.0;
  return out;
}

}  // namespace

void FocalConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0)) throw ConfigError("focal alpha must lie in (0, 1)");
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

VectorLoss cross_entropy(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size()) throw ConfigError("cross_entropy: gold class out of range");
  const std::vector<std::uint8_t> all(logits.size(), 1);
  return masked_cross_entropy(logits, all, gold);
}

double binary_cross_entropy(double p, int y) { return -std::log(y == 1 ? p : 1.0 - p); }

ScalarLoss binary_cross_entropy_logit(double logit, int y) {
  const double s = y == 1 ? 1.0 : -1.0;
  return {softplus(-s * logit), sigmoid(logit) - static_cast<double>(y == 1)};
}

double focal_loss(double p, int y, const FocalConfig& cfg) {
  const double p_t = y == 1 ? p : 1.0 - p;
  const double alpha_t = cfg.alpha ? (y == 1 ? *cfg.alpha : 1.0 - *cfg.alpha) : 1.0;
  return -alpha_t * std::pow(1.0 - p_t, cfg.gamma) * std::log(p_t);
}

ScalarLoss focal_loss_logit(double logit, int y, const FocalConfig& cfg) {
  const double s = y == 1 ? 1.0 : -1.0;
  const double alpha_t = cfg.alpha ? (y == 1 ? *cfg.alpha : 1.0 - *cfg.alpha) : 1.0;
  const double log_pt = -softplus(-s * logit);
  const double p_t = sigmoid(s * logit);
  const double q = sigmoid(-s * logit);  // 1 - p_t without cancellation
  const double q_gamma = cfg.gamma == 0.0 ? 1.0 : std::pow(q, cfg.gamma);
  ScalarLoss out;
  out.loss = -alpha_t * q_gamma * log_pt;
  // dL/dz = -alpha_t s q^gamma (q - gamma p_t log p_t)
  out.d_logit = -alpha_t * s * q_gamma * (q - cfg.gamma * p_t * log_pt);
  return out;
}

SpanLoss span_loss(std::span<const double> start_scores, std::span<const double> end_scores,
                   std::span<const std::uint8_t> valid, std::size_t gold_start,
                   std::size_t gold_end) {
  if (start_scores.size() != end_scores.size() || start_scores.size() != valid.size()) {
    throw ConfigError("span_loss: score and mask lengths differ");
  }
  if (gold_start >= valid.size() || gold_end >= valid.size() || !valid[gold_start] ||
      !valid[gold_end]) {
    throw ConfigError("span_loss: gold span outside the valid context positions");
  }
  auto s = masked_cross_entropy(start_scores, valid, gold_start);
  auto e = masked_cross_entropy(end_scores, valid, gold_end);
  SpanLoss out;
  out.loss = 0.5 * (s.loss + e.loss);
  out.d_start = std::move(s.grad);
  out.d_end = std::move(e.grad);
  for (auto& g : out.d_start) g *= 0.5;
  for (auto& g : out.d_end) g *= 0.5;
  return out;
}

}  // namespace finkey
