#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "finkey/corpus.hpp"

namespace finkey {

struct Token {
  std::string text;
  CharSpan span;

  bool operator==(const Token&) const = default;
};

/// CJK characters are single tokens, ASCII letter/digit runs are one
/// lowercased token, every other non-space character stands alone.
std::vector<Token> tokenize(std::string_view text);

class Vocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::int32_t kSep = 3;
  static constexpr std::size_t kReserved = 4;

  /// Only the reserved tokens.
  Vocab();

  /// Reserved tokens first, then tokens with count >= min_freq ordered by
  /// (count desc, token asc), truncated so that size() <= max_size.
  static Vocab build(std::span<const std::string> tokens, std::size_t min_freq,
                     std::size_t max_size);

  /// Convenience: tokenize every text, then build.
  static Vocab build_from_texts(std::span<const std::string> texts, std::size_t min_freq,
                                std::size_t max_size);

  std::int32_t id_of(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// "token<TAB>id" per line, ids ascending.
  void write(std::ostream& out) const;
  static Vocab read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  /// Rebuilds from an ordered token list (index = id). Throws DataError when
  /// the reserved tokens are missing or a token repeats.
  static Vocab from_tokens(std::vector<std::string> tokens);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  struct Empty {};
  explicit Vocab(Empty) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Encoded model input. All four lists have length max_len. Offsets index
/// the first string for segment 0 and the second string for segment 1.
struct TokenSequence {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> segment_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::optional<CharSpan>> offsets;

  std::size_t length() const { return ids.size(); }
  /// Number of leading real (unpadded) positions.
  std::size_t real_length() const;

  bool operator==(const TokenSequence&) const = default;
};

/// [CLS] tokens [SEP] + padding; tokens past max_len - 2 are dropped.
/// Throws ConfigError if max_len < 3.
TokenSequence encode_single(std::string_view text, const Vocab& vocab, std::size_t max_len);

/// [CLS] A [SEP] B [SEP] + padding; only B is truncated. Throws ConfigError
/// if max_len < 4 or A does not fit on its own.
TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocab& vocab,
                          std::size_t max_len);

}  // namespace finkey
