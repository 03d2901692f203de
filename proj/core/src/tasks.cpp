#include "finkey/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "finkey/errors.hpp"

namespace finkey {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Sentiment: return "sentiment";
    case Task::Match: return "match";
    case Task::Mrc: return "mrc";
  }
  return "sentiment";
}

std::optional<Task> parse_task(std::string_view text) {
  if (text == "sentiment") return Task::Sentiment;
  if (text == "match") return Task::Match;
  if (text == "mrc") return Task::Mrc;
  return std::nullopt;
}

std::size_t head_outputs(Task task) { return task == Task::Match ? 1 : 2; }

template <typename T>
Head<T> init_head(Task task, std::size_t d_model, Rng& rng) {
  const std::size_t k = head_outputs(task);
  const double bound = std::sqrt(6.0 / static_cast<double>(d_model + k));
  Head<T> head;
  head.task = task;
  head.weight.resize(static_cast<Eigen::Index>(d_model), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < head.weight.rows(); ++i)
    for (Eigen::Index j = 0; j < head.weight.cols(); ++j)
      head.weight(i, j) = static_cast<T>(rng.uniform(-bound, bound));
  head.bias = Matrix<T>::Zero(1, static_cast<Eigen::Index>(k));
  return head;
}

template <typename T>
Matrix<T> head_forward(const Head<T>& head, const PooledOutput<T>& pooled) {
  Matrix<T> out;
  if (head.task == Task::Mrc) {
    out.noalias() = pooled.token_vecs * head.weight;
  } else {
    out.noalias() = pooled.sentence_vec * head.weight;
  }
  out.rowwise() += head.bias.row(0);
  return out;
}

template <typename T>
std::pair<RowVector<T>, Matrix<T>> head_backward(const Head<T>& head, const PooledOutput<T>& pooled,
                                                 const Matrix<T>& d_out, Head<T>& grads) {
  grads.bias.row(0) += d_out.colwise().sum();
  if (head.task == Task::Mrc) {
    grads.weight.noalias() += pooled.token_vecs.transpose() * d_out;
    Matrix<T> d_tokens;
    d_tokens.noalias() = d_out * head.weight.transpose();
    return {RowVector<T>(), std::move(d_tokens)};
  }
  grads.weight.noalias() += pooled.sentence_vec.transpose() * d_out;
  RowVector<T> d_sentence = d_out.row(0) * head.weight.transpose();
  return {std::move(d_sentence), Matrix<T>()};
}

template Head<float> init_head<float>(Task, std::size_t, Rng&);
template Head<double> init_head<double>(Task, std::size_t, Rng&);
template Matrix<float> head_forward(const Head<float>&, const PooledOutput<float>&);
template Matrix<double> head_forward(const Head<double>&, const PooledOutput<double>&);
template std::pair<RowVector<float>, Matrix<float>> head_backward(const Head<float>&,
                                                                  const PooledOutput<float>&,
                                                                  const Matrix<float>&, Head<float>&);
template std::pair<RowVector<double>, Matrix<double>> head_backward(const Head<double>&,
                                                                    const PooledOutput<double>&,
                                                                    const Matrix<double>&,
                                                                    Head<double>&);

SentimentPrediction predict_sentiment(const TaskModel& model, std::string_view text) {
  const auto seq = encode_single(text, model.vocab, model.config.max_len);
  const auto pooled = forward_real(model.encoder, model.config, seq, false, nullptr);
  const Matrix<float> logits = head_forward(model.head, pooled);
  const double l0 = logits(0, 0), l1 = logits(0, 1);
  // softmax over two classes: p(negative) = sigmoid(l0 - l1)
  SentimentPrediction out;
  out.prob_negative = sigmoid(l0 - l1);
  out.label = out.prob_negative >= 0.5 ? SentimentLabel::Negative : SentimentLabel::Positive;
  return out;
}

double score_entity(const TaskModel& model, std::string_view entity, std::string_view text) {
  const auto seq = encode_pair(entity, text, model.vocab, model.config.max_len);
  const auto pooled = forward_real(model.encoder, model.config, seq, false, nullptr);
  const Matrix<float> logit = head_forward(model.head, pooled);
  return sigmoid(static_cast<double>(logit(0, 0)));
}

std::vector<MatchPrediction> score_entities(const TaskModel& model,
                                            std::span<const std::string> entities,
                                            std::string_view text, double threshold) {
  std::vector<MatchPrediction> out;
  out.reserve(entities.size());
  for (const auto& e : entities) {
    const double s = score_entity(model, e, text);
    out.push_back({e, s, s >= threshold});
  }
  return out;
}

std::vector<std::string> detect_key_entities(std::span<const MatchPrediction> scores,
                                             double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  std::vector<std::string> out;
  for (const auto& s : scores)
    if (s.score >= threshold) out.push_back(s.entity);
  return out;
}

std::string build_question(std::string_view tag, std::string_view question_template) {
  static constexpr std::string_view kPlaceholder = "{tag}";
  const auto first = question_template.find(kPlaceholder);
  if (first == std::string_view::npos) {
    throw ConfigError("question template has no {tag} placeholder");
  }
  if (question_template.find(kPlaceholder, first + kPlaceholder.size()) != std::string_view::npos) {
    throw ConfigError("question template has more than one {tag} placeholder");
  }
  std::string out(question_template.substr(0, first));
  out.append(tag);
  out.append(question_template.substr(first + kPlaceholder.size()));
  return out;
}

std::vector<std::uint8_t> context_positions(const TokenSequence& seq) {
  std::vector<std::uint8_t> valid(seq.length(), 0);
  for (std::size_t i = 0; i < seq.length(); ++i) {
    valid[i] = seq.attention_mask[i] && seq.segment_ids[i] == 1 && seq.offsets[i].has_value();
  }
  return valid;
}

std::optional<std::pair<std::size_t, std::size_t>> best_span(std::span<const double> start,
                                                             std::span<const double> end,
                                                             std::span<const std::uint8_t> valid,
                                                             std::size_t max_span_len) {
  if (max_span_len < 1) throw ConfigError("max_span_len must be >= 1");
  std::optional<std::pair<std::size_t, std::size_t>> best;
  double best_score = 0.0;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i]) continue;
    const std::size_t last = std::min(valid.size() - 1, i + max_span_len - 1);
    for (std::size_t j = i; j <= last; ++j) {
      if (!valid[j]) continue;
      const double score = start[i] + end[j];
      // strict improvement keeps the earliest (i, j) on ties
      if (!best || score > best_score) {
        best = {i, j};
        best_score = score;
      }
    }
  }
  return best;
}

SpanPrediction extract_span(const TaskModel& model, std::string_view question,
                            std::string_view context, std::size_t max_span_len) {
  const auto seq = encode_pair(question, context, model.vocab, model.config.max_len);
  const auto valid = context_positions(seq);
  if (std::find(valid.begin(), valid.end(), 1) == valid.end()) {
    throw ConfigError("context is empty after truncation");
  }
  const auto pooled = forward_real(model.encoder, model.config, seq, false, nullptr);
  const Matrix<float> scores = head_forward(model.head, pooled);
  std::vector<double> start(seq.length()), end(seq.length());
  for (std::size_t i = 0; i < seq.length(); ++i) {
    start[i] = scores(static_cast<Eigen::Index>(i), 0);
    end[i] = scores(static_cast<Eigen::Index>(i), 1);
  }
  const auto span = *best_span(start, end, valid, max_span_len);
  SpanPrediction out;
  out.start_token = span.first;
  out.end_token = span.second;
  out.char_span = {seq.offsets[span.first]->begin, seq.offsets[span.second]->end};
  out.text = std::string(context.substr(out.char_span.begin, out.char_span.size()));
  return out;
}

std::optional<std::pair<std::size_t, std::size_t>> char_span_to_tokens(const TokenSequence& seq,
                                                                       CharSpan span) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (!seq.attention_mask[i] || seq.segment_ids[i] != 1 || !seq.offsets[i]) continue;
    const auto& o = *seq.offsets[i];
    if (o.end <= span.begin || o.begin >= span.end) continue;
    if (!first) first = i;
    last = i;
  }
  if (!first) return std::nullopt;
  // the whole gold span must survive truncation
  if (seq.offsets[*last]->end < span.end) return std::nullopt;
  return std::make_pair(*first, *last);
}

}  // namespace finkey
