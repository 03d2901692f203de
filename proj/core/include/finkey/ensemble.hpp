#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "finkey/tasks.hpp"
#include "finkey/training.hpp"

namespace finkey {

struct EnsembleSpec {
  std::vector<std::uint64_t> seeds;
  std::size_t top_m = 10;

  /// Throws ConfigError for repeated seeds or top_m outside [1, |seeds|].
  void validate() const;
};

struct MemberScore {
  std::uint64_t seed = 0;
  double dev_score = 0.0;
  bool selected = false;
};

struct EnsembleResult {
  std::vector<Checkpoint> selected;  // top_m, best first
  std::vector<MemberScore> members;  // every seed, best first
};

/// Trains one checkpoint per seed (config otherwise identical), ranks by
/// dev score descending with ties to the smaller seed, keeps the top_m.
EnsembleResult ensemble_train_select(std::span<const Document> train_docs,
                                     std::span<const Document> dev_docs, const TrainConfig& base,
                                     const EnsembleSpec& spec, std::size_t threads = 1);

/// Ranking step of ensemble_train_select over already-trained members.
std::vector<std::size_t> rank_members(std::span<const MemberScore> members);

/// Majority label; an exact tie is Negative iff the mean prob_negative is
/// >= 0.5. The output probability is the member mean. Throws ConfigError for
/// an empty member list.
SentimentPrediction vote_sentiment(std::span<const SentimentPrediction> members);

/// Entity is key iff strictly more than half of the members score it
/// >= score_threshold. Members must score the same entities in the same
/// order (ConfigError otherwise). Output keeps entity-list order.
std::vector<std::string> vote_key_entities(std::span<const std::vector<MatchPrediction>> members,
                                           double score_threshold);

/// Alternative combiner: threshold the mean member score.
std::vector<std::string> average_key_entities(std::span<const std::vector<MatchPrediction>> members,
                                              double score_threshold);

}  // namespace finkey
