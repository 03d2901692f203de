#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finkey/corpus.hpp"
#include "finkey/encoder.hpp"
#include "finkey/losses.hpp"
#include "finkey/tasks.hpp"

namespace finkey {

enum class LossKind { CrossEntropy, Focal };

std::string_view to_string(LossKind kind);

struct TrainConfig {
  Task task = Task::Sentiment;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_len = 128;
  LossKind loss = LossKind::CrossEntropy;
  FocalConfig focal;
  double threshold = 0.5;  // match task: key-entity decision threshold
  std::size_t max_span_len = kDefaultMaxSpanLen;
  std::string question_template = std::string(kDefaultQuestionTemplate);
  std::size_t vocab_min_freq = 1;
  std::size_t vocab_max_size = 30000;
  EncoderConfig encoder;  // vocab_size and max_len are filled in by train()

  /// Throws ConfigError on out-of-range values; focal loss is only defined
  /// for the match task.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// JSON object form. Missing keys keep the value from `base`.
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(std::string_view json_text, const TrainConfig& base = {});

/// Unit of ensembling: trained model plus how it was trained.
struct Checkpoint {
  TaskModel model;
  TrainConfig train_config;
  double dev_score = 0.0;
  std::uint64_t seed = 0;
};

/// Binary layout (little-endian):
///   "FKCKPT\0\0", u32 version, u64 header length, header JSON,
///   u32 tensor count, then per tensor: u32 name length, name,
///   u32 rows, u32 cols, rows*cols float32 in row-major order.
/// The header carries the task, encoder config, train config, dev score,
/// seed and vocabulary tokens.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double dev_score = 0.0;
};

struct DataWarnings {
  std::size_t docs_without_labels = 0;   // skipped for lack of gold fields
  std::size_t answers_dropped = 0;       // mrc: gold absent or truncated away
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  DataWarnings warnings;
};

/// Model input with its supervision target.
struct PreparedExample {
  TokenSequence seq;
  int label = 0;               // sentiment class or key-entity flag
  std::size_t gold_start = 0;  // mrc token positions
  std::size_t gold_end = 0;
};

/// Texts the training vocabulary is built from (texts, entities, questions).
std::vector<std::string> vocab_texts(std::span<const Document> docs, const TrainConfig& cfg);

std::vector<PreparedExample> prepare_examples(std::span<const Document> docs, const TrainConfig& cfg,
                                              const Vocab& vocab, DataWarnings& warnings);

/// Dev metric of the task: accuracy (sentiment), entity F1 at
/// cfg.threshold (match), exact match (mrc). Throws DataError when the dev
/// documents hold nothing to score.
double dev_score(const TaskModel& model, std::span<const Document> dev, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam with global-norm clipping; all randomness comes from one
/// generator seeded with cfg.seed. Returns the best-dev-epoch parameters.
/// The vocabulary is built from train_docs only. Throws NumericalError on a
/// non-finite loss, naming the batch.
TrainResult train(std::span<const Document> train_docs, std::span<const Document> dev_docs,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;
};

/// Seeded permutation of 0..n-1 dealt round-robin into k folds.
/// Throws ConfigError unless 2 <= k <= n.
FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct CrossValResult {
  std::vector<double> fold_scores;
  double mean = 0.0;
};

/// Trains k models, each holding out one fold (split seeded by cfg.seed).
CrossValResult cross_validate(std::span<const Document> docs, const TrainConfig& cfg, std::size_t k,
                              std::size_t threads = 1);

struct SearchGrid {
  std::vector<double> lr_factors{0.5, 1.0, 2.0};
  std::vector<double> batch_factors{0.5, 1.0, 2.0};
};

struct SearchRow {
  double learning_rate = 0.0;
  std::size_t batch_size = 0;
  std::size_t changed = 0;  // parameters that differ from the base
  CrossValResult scores;
};

struct SearchResult {
  TrainConfig best;
  std::size_t best_row = 0;
  std::vector<SearchRow> table;
};

/// Cross-validates every grid point around `base` (factor 1 is always
/// included). Ties on mean score go to fewer changed parameters, then to
/// the smaller (learning_rate, batch_size). Throws ConfigError on an empty
/// factor list.
SearchResult neighborhood_search(const TrainConfig& base, const SearchGrid& grid,
                                 std::span<const Document> docs, std::size_t k,
                                 std::size_t threads = 1);

}  // namespace finkey
