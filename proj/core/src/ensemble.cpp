#include "finkey/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "finkey/errors.hpp"
#include "finkey/parallel.hpp"

namespace finkey {

void EnsembleSpec::validate() const {
  if (seeds.empty()) throw ConfigError("ensemble needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("ensemble seeds must be distinct");
  }
  if (top_m < 1 || top_m > seeds.size()) {
    throw ConfigError("ensemble top_m must lie in [1, number of seeds]");
  }
}

std::vector<std::size_t> rank_members(std::span<const MemberScore> members) {
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].dev_score != members[b].dev_score) {
      return members[a].dev_score > members[b].dev_score;
    }
    return members[a].seed < members[b].seed;
  });
  return order;
}

EnsembleResult ensemble_train_select(std::span<const Document> train_docs,
                                     std::span<const Document> dev_docs, const TrainConfig& base,
                                     const EnsembleSpec& spec, std::size_t threads) {
  spec.validate();
  std::vector<Checkpoint> trained(spec.seeds.size());
  parallel_for(spec.seeds.size(), threads, [&](std::size_t i) {
    TrainConfig cfg = base;
    cfg.seed = spec.seeds[i];
    trained[i] = train(train_docs, dev_docs, cfg).checkpoint;
  });
  std::vector<MemberScore> scores;
  for (std::size_t i = 0; i < trained.size(); ++i) {
    scores.push_back({spec.seeds[i], trained[i].dev_score, false});
  }
  const auto order = rank_members(scores);
  EnsembleResult result;
  for (std::size_t r = 0; r < order.size(); ++r) {
    MemberScore m = scores[order[r]];
    m.selected = r < spec.top_m;
    if (m.selected) result.selected.push_back(std::move(trained[order[r]]));
    result.members.push_back(m);
  }
  return result;
}

SentimentPrediction vote_sentiment(std::span<const SentimentPrediction> members) {
  if (members.empty()) throw ConfigError("vote_sentiment needs at least one member");
  std::size_t negative = 0;
  double prob_sum = 0.0;
  for (const auto& m : members) {
    negative += m.label == SentimentLabel::Negative;
    prob_sum += m.prob_negative;
  }
  const std::size_t positive = members.size() - negative;
  SentimentPrediction out;
  out.prob_negative = prob_sum / static_cast<double>(members.size());
  if (negative != positive) {
    out.label = negative > positive ? SentimentLabel::Negative : SentimentLabel::Positive;
  } else {
    out.label = out.prob_negative >= 0.5 ? SentimentLabel::Negative : SentimentLabel::Positive;
  }
  return out;
}

namespace {

void check_aligned(std::span<const std::vector<MatchPrediction>> members) {
  if (members.empty()) throw ConfigError("key-entity voting needs at least one member");
  for (const auto& m : members) {
    if (m.size() != members[0].size()) throw ConfigError("ensemble members scored different entity lists");
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i].entity != members[0][i].entity) {
        throw ConfigError("ensemble members scored different entity lists");
      }
    }
  }
}

void check_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
}

}  // namespace

std::vector<std::string> vote_key_entities(std::span<const std::vector<MatchPrediction>> members,
                                           double score_threshold) {
  check_threshold(score_threshold);
  check_aligned(members);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < members[0].size(); ++i) {
    std::size_t votes = 0;
    for (const auto& m : members) votes += m[i].score >= score_threshold;
    if (2 * votes > members.size()) out.push_back(members[0][i].entity);
  }
  return out;
}

std::vector<std::string> average_key_entities(std::span<const std::vector<MatchPrediction>> members,
                                              double score_threshold) {
  check_threshold(score_threshold);
  check_aligned(members);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < members[0].size(); ++i) {
    double sum = 0.0;
    for (const auto& m : members) sum += m[i].score;
    if (sum / static_cast<double>(members.size()) >= score_threshold) {
      out.push_back(members[0][i].entity);
    }
  }
  return out;
}

}  // namespace finkey
