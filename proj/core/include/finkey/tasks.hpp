#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "finkey/corpus.hpp"
#include "finkey/encoder.hpp"
#include "finkey/losses.hpp"
#include "finkey/tokenizer.hpp"

namespace finkey {

enum class Task { Sentiment, Match, Mrc };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view text);

inline constexpr std::string_view kDefaultQuestionTemplate = "Which company involves {tag}?";
inline constexpr std::size_t kDefaultMaxSpanLen = 16;

/// Output columns: sentiment 2 logits (negative, positive); match 1 logit;
/// mrc 2 per-token scores (start, end).
std::size_t head_outputs(Task task);

/// Linear head on top of the encoder. Sentiment and match read the pooled
/// CLS vector; mrc scores every token.
template <typename T>
struct Head {
  Task task = Task::Sentiment;
  Matrix<T> weight;  // d_model x head_outputs(task)
  Matrix<T> bias;    // 1 x head_outputs(task)

  template <typename F>
  void for_each(F&& f) {
    f(std::string("head.weight"), weight);
    f(std::string("head.bias"), bias);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string("head.weight"), weight);
    f(std::string("head.bias"), bias);
  }

  Head zeros_like() const {
    return {task, Matrix<T>::Zero(weight.rows(), weight.cols()),
            Matrix<T>::Zero(bias.rows(), bias.cols())};
  }
  template <typename To>
  Head<To> cast() const {
    return {task, weight.template cast<To>(), bias.template cast<To>()};
  }
};

template <typename T>
Head<T> init_head(Task task, std::size_t d_model, Rng& rng);

/// Head outputs: 1 x k logits for sentence heads, max_len x 2 scores for
/// the span head (padded rows are whatever the encoder left there).
template <typename T>
Matrix<T> head_forward(const Head<T>& head, const PooledOutput<T>& pooled);

/// Accumulates head gradients and returns the upstream gradient for the
/// encoder: (d_sentence_vec, d_token_vecs). Only one of the two is non-empty.
template <typename T>
std::pair<RowVector<T>, Matrix<T>> head_backward(const Head<T>& head, const PooledOutput<T>& pooled,
                                                 const Matrix<T>& d_out, Head<T>& grads);

/// A trained encoder + head + the vocabulary it was trained with.
struct TaskModel {
  EncoderConfig config;
  EncoderParams<float> encoder;
  Head<float> head;
  Vocab vocab;
};

struct SentimentPrediction {
  SentimentLabel label = SentimentLabel::Positive;
  double prob_negative = 0.0;
};

struct MatchPrediction {
  std::string entity;
  double score = 0.0;
  bool is_key = false;
};

struct SpanPrediction {
  std::size_t start_token = 0;  // inclusive, positions in the encoded pair
  std::size_t end_token = 0;
  CharSpan char_span;           // into the context string
  std::string text;
};

/// Single-model rule: Negative iff prob_negative >= 0.5.
SentimentPrediction predict_sentiment(const TaskModel& model, std::string_view text);

/// Sigmoid key-entity probability of (entity, text).
double score_entity(const TaskModel& model, std::string_view entity, std::string_view text);

/// Scores every entity and marks is_key = score >= threshold.
std::vector<MatchPrediction> score_entities(const TaskModel& model,
                                            std::span<const std::string> entities,
                                            std::string_view text, double threshold);

/// Entities whose score is >= threshold, in input order. Throws ConfigError
/// for a threshold outside [0, 1].
std::vector<std::string> detect_key_entities(std::span<const MatchPrediction> scores,
                                             double threshold);

/// Replaces the single "{tag}" placeholder. Throws ConfigError when the
/// template holds zero or several placeholders.
std::string build_question(std::string_view tag, std::string_view question_template);

/// Positions of a question/context pair that may hold an answer: real
/// segment-1 tokens that came from the context.
std::vector<std::uint8_t> context_positions(const TokenSequence& seq);

/// argmax over valid (i, j), i <= j < i + max_span_len, of start[i] + end[j].
/// Ties go to the smaller i, then the smaller j. Returns nullopt when no
/// position is valid.
std::optional<std::pair<std::size_t, std::size_t>> best_span(std::span<const double> start,
                                                             std::span<const double> end,
                                                             std::span<const std::uint8_t> valid,
                                                             std::size_t max_span_len);

/// Throws ConfigError if the context is empty after truncation.
SpanPrediction extract_span(const TaskModel& model, std::string_view question,
                            std::string_view context, std::size_t max_span_len);

/// Token positions covering a character span of the context (first and last
/// overlapping context token); nullopt when the span was truncated away.
std::optional<std::pair<std::size_t, std::size_t>> char_span_to_tokens(const TokenSequence& seq,
                                                                       CharSpan span);

}  // namespace finkey
