#include "finkey/pipeline.hpp"

#include "finkey/ensemble.hpp"
#include "finkey/errors.hpp"
#include "finkey/parallel.hpp"

namespace finkey {

std::string_view to_string(PipelineMode mode) {
  return mode == PipelineMode::Coarse ? "coarse" : "fine";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view text) {
  if (text == "coarse") return PipelineMode::Coarse;
  if (text == "fine") return PipelineMode::Fine;
  return std::nullopt;
}

namespace {

void require_task(std::span<const Checkpoint> models, Task task, const char* role) {
  for (const auto& m : models) {
    if (m.model.head.task != task) {
      throw ConfigError(std::string(role) + " checkpoint was trained for task " +
                        std::string(to_string(m.model.head.task)));
    }
  }
}

void process(const Document& doc, std::span<const Checkpoint> sentiment,
             std::span<const Checkpoint> matchers, const Checkpoint* mrc,
             const PipelineOptions& options, DocumentResult& out) {
  out.id = doc.id;
  std::vector<SentimentPrediction> votes;
  votes.reserve(sentiment.size());
  for (const auto& member : sentiment) votes.push_back(predict_sentiment(member.model, doc.cleaned_text));
  out.sentiment = vote_sentiment(votes);
  if (out.sentiment.label != SentimentLabel::Negative) return;

  if (options.mode == PipelineMode::Coarse) {
    std::vector<std::string> entities;
    if (doc.entity_list) {
      entities = *doc.entity_list;
    } else if (options.lexicon) {
      entities = rule_match_entities(doc.cleaned_text, *options.lexicon);
    } else {
      out.error = "no entity list and no lexicon";
      return;
    }
    if (entities.empty()) {
      out.key_entities.emplace();
      out.warning = true;
      return;
    }
    std::vector<std::vector<MatchPrediction>> scored;
    for (const auto& member : matchers) {
      scored.push_back(score_entities(member.model, entities, doc.cleaned_text, options.match_threshold));
    }
    out.key_entities = options.aggregation == MatchAggregation::Vote
                           ? vote_key_entities(scored, options.match_threshold)
                           : average_key_entities(scored, options.match_threshold);
    return;
  }

  if (!doc.tag) {
    out.error = "fine mode needs a tag";
    return;
  }
  const auto question = build_question(*doc.tag, options.question_template);
  out.span_text = extract_span(mrc->model, question, doc.cleaned_text, options.max_span_len).text;
}

}  // namespace

PipelineResult run_pipeline(std::span<const Document> docs, std::span<const Checkpoint> sentiment,
                            std::span<const Checkpoint> matchers, const Checkpoint* mrc,
                            const PipelineOptions& options) {
  if (sentiment.empty()) throw ConfigError("pipeline needs at least one sentiment checkpoint");
  if (!(options.match_threshold >= 0.0 && options.match_threshold <= 1.0)) {
    throw ConfigError("match threshold must lie in [0, 1]");
  }
  build_question("", options.question_template);
  require_task(sentiment, Task::Sentiment, "sentiment");
  if (options.mode == PipelineMode::Coarse) {
    if (matchers.empty()) throw ConfigError("coarse pipeline needs at least one matcher checkpoint");
    require_task(matchers, Task::Match, "matcher");
  } else {
    if (!mrc) throw ConfigError("fine pipeline needs an mrc checkpoint");
    require_task(std::span<const Checkpoint>(mrc, 1), Task::Mrc, "mrc");
  }

  PipelineResult result;
  result.documents.resize(docs.size());
  parallel_for(docs.size(), options.threads, [&](std::size_t i) {
    try {
      process(docs[i], sentiment, matchers, mrc, options, result.documents[i]);
    } catch (const std::exception& e) {
      result.documents[i].error = e.what();
    }
  });
  for (const auto& d : result.documents) {
    ++result.processed;
    if (d.error) ++result.errors;
    else if (d.sentiment.label == SentimentLabel::Positive) ++result.filtered_positive;
    if (d.warning) ++result.warnings;
  }
  return result;
}

}  // namespace finkey
