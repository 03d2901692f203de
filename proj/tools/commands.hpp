#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "finkey/corpus.hpp"
#include "finkey/ensemble.hpp"
#include "finkey/pipeline.hpp"
#include "finkey/training.hpp"

namespace finkey::cli {

inline constexpr std::string_view kToolName = "finkey";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kReportFormat = 1;

/// Exit codes shared by every command.
enum ExitCode : int { kOk = 0, kDataFailure = 1, kConfigFailure = 2, kNumericalFailure = 3 };

/// Everything a run reads from the config file. Relative paths are resolved
/// against the directory holding the config file.
struct RunConfig {
  std::optional<Schema> schema;
  std::optional<std::filesystem::path> train_path, dev_path, corpus_path, vocab_path, lexicon_path;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "reports";

  std::map<Task, TrainConfig> train;  // one per task, defaults filled in
  EnsembleSpec ensemble{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 10};
  std::size_t crossval_k = 10;
  SearchGrid search;

  PipelineOptions pipeline;
  std::vector<std::filesystem::path> sentiment_checkpoints;
  std::vector<std::filesystem::path> matcher_checkpoints;
  std::optional<std::filesystem::path> mrc_checkpoint;

  std::string canonical;  // effective config as sorted JSON, hashed into reports

  const TrainConfig& train_config(Task task) const { return train.at(task); }
};

/// Throws ConfigError on unknown keys, bad values or thresholds outside [0, 1].
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finkey::cli
