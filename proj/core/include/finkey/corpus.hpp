#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace finkey {

enum class SentimentLabel { Negative = 0, Positive = 1 };

std::string_view to_string(SentimentLabel label);
std::optional<SentimentLabel> parse_sentiment(std::string_view text);

/// Which optional fields a corpus carries. Dataset-1 texts come with a
/// sentiment and an entity list; dataset-2 texts are negative and carry a tag.
enum class Schema { Dataset1, Dataset2 };

std::string_view to_string(Schema schema);
std::optional<Schema> parse_schema(std::string_view text);

struct Document {
  std::string id;
  std::string raw_text;
  std::string cleaned_text;
  std::optional<SentimentLabel> sentiment;
  std::optional<std::vector<std::string>> entity_list;
  std::optional<std::vector<std::string>> key_entities;
  std::optional<std::string> tag;

  bool operator==(const Document&) const = default;
};

/// Half-open byte range into a UTF-8 string.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const CharSpan&) const = default;
};

/// Dictionary of entity surface forms used for rule matching.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::string>& entries);

  /// Adds a trimmed entry. Returns false for blanks and duplicates.
  bool add(std::string_view entry);

  const std::set<std::string>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// One entry per line, UTF-8.
  static Lexicon load(const std::filesystem::path& path);

 private:
  std::set<std::string> entries_;
};

struct PairExample {
  std::string doc_id;
  std::string entity;
  std::string text;
  std::optional<int> label;  // 1 = key entity; absent for inference

  bool operator==(const PairExample&) const = default;
};

struct MrcExample {
  std::string doc_id;
  std::string question;
  std::string context;
  std::optional<CharSpan> answer;

  bool operator==(const MrcExample&) const = default;
};

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string id;
  std::string message;
};

struct LoadResult {
  std::vector<Document> documents;
  std::vector<RecordError> errors;
  std::size_t lines = 0;  // non-blank records seen
};

/// Drops URLs (http://, https://, ftp://, www. up to the next whitespace),
/// control and invisible characters and malformed UTF-8, collapses whitespace
/// runs to one space and trims. Idempotent.
std::string clean_text(std::string_view raw);

/// Parses line-delimited JSON records. A line that is not a JSON object with
/// string `id` and `text` throws DataError naming the line; schema and
/// invariant violations are collected per record and the record is dropped.
LoadResult parse_corpus(std::istream& in, Schema schema);
LoadResult load_corpus(const std::filesystem::path& path, Schema schema);

/// Writes documents in the corpus line format (raw text under "text").
void write_corpus(std::ostream& out, std::span<const Document> docs);
void save_corpus(const std::filesystem::path& path, std::span<const Document> docs);

/// Sorted, de-duplicated lexicon entries occurring as substrings of text.
std::vector<std::string> rule_match_entities(std::string_view text, const Lexicon& lexicon);

struct PairDataset {
  std::vector<PairExample> examples;
  std::size_t skipped_docs = 0;  // documents without an entity list
};

/// One example per (document, entity) in document then entity-list order.
/// Labels are set only for documents that carry key_entities.
PairDataset build_pair_dataset(std::span<const Document> docs);

struct MrcDataset {
  std::vector<MrcExample> examples;
  std::size_t dropped = 0;  // gold entity absent from the cleaned text
};

/// Question from the tag; answer is the first occurrence of the single gold
/// key entity. Documents without key entities yield unanswered examples.
/// Throws DataError for a document without a tag.
MrcDataset build_mrc_dataset(std::span<const Document> docs, std::string_view question_template);

}  // namespace finkey
