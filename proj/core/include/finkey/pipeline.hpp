#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finkey/corpus.hpp"
#include "finkey/tasks.hpp"
#include "finkey/training.hpp"

namespace finkey {

/// coarse: pick key entities from each text's entity list;
/// fine: extract the entity answering the tag question.
enum class PipelineMode { Coarse, Fine };

enum class MatchAggregation { Vote, Average };

std::string_view to_string(PipelineMode mode);
std::optional<PipelineMode> parse_pipeline_mode(std::string_view text);

struct PipelineOptions {
  PipelineMode mode = PipelineMode::Coarse;
  double match_threshold = 0.5;
  MatchAggregation aggregation = MatchAggregation::Vote;
  std::string question_template = std::string(kDefaultQuestionTemplate);
  std::size_t max_span_len = kDefaultMaxSpanLen;
  const Lexicon* lexicon = nullptr;  // entity lists for texts that lack one
  std::size_t threads = 1;
};

struct DocumentResult {
  std::string id;
  SentimentPrediction sentiment;
  std::optional<std::vector<std::string>> key_entities;  // coarse, Negative only
  std::optional<std::string> span_text;                  // fine, Negative only
  std::optional<std::string> error;
  bool warning = false;  // e.g. empty entity list
};

struct PipelineResult {
  std::vector<DocumentResult> documents;  // input order
  std::size_t processed = 0;
  std::size_t filtered_positive = 0;
  std::size_t warnings = 0;
  std::size_t errors = 0;
};

/// Stage 1 votes the sentiment ensemble; Positive texts stop there. Stage 2
/// runs the matcher ensemble over the entity list (coarse) or the span model
/// on the tag question (fine). Per-document problems become error entries
/// and processing continues. Throws ConfigError if the models needed by the
/// mode are missing.
PipelineResult run_pipeline(std::span<const Document> docs, std::span<const Checkpoint> sentiment,
                            std::span<const Checkpoint> matchers, const Checkpoint* mrc,
                            const PipelineOptions& options);

}  // namespace finkey
