#include "finkey/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "finkey/errors.hpp"
#include "finkey/utf8.hpp"

namespace finkey {

namespace {

const std::vector<std::string> kReservedTokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};

void push_tokens(std::string_view text, const Vocab& vocab, std::uint8_t segment,
                 std::size_t limit, TokenSequence& seq) {
  const auto tokens = tokenize(text);
  const std::size_t keep = std::min(limit, tokens.size());
  for (std::size_t i = 0; i < keep; ++i) {
    seq.ids.push_back(vocab.id_of(tokens[i].text));
    seq.segment_ids.push_back(segment);
    seq.attention_mask.push_back(1);
    seq.offsets.push_back(tokens[i].span);
  }
}

void push_special(std::int32_t id, std::uint8_t segment, TokenSequence& seq) {
  seq.ids.push_back(id);
  seq.segment_ids.push_back(segment);
  seq.attention_mask.push_back(1);
  seq.offsets.push_back(std::nullopt);
}

void pad_to(std::size_t max_len, TokenSequence& seq) {
  seq.ids.resize(max_len, Vocab::kPad);
  seq.segment_ids.resize(max_len, 0);
  seq.attention_mask.resize(max_len, 0);
  seq.offsets.resize(max_len, std::nullopt);
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  const auto cps = utf8::decode(text);
  std::size_t i = 0;
  while (i < cps.size()) {
    const auto& cp = cps[i];
    if (utf8::is_whitespace(cp.value)) {
      ++i;
      continue;
    }
    if (utf8::is_ascii_alnum(cp.value)) {
      std::size_t j = i;
      std::string word;
      while (j < cps.size() && utf8::is_ascii_alnum(cps[j].value)) {
        char c = static_cast<char>(cps[j].value);
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        word.push_back(c);
        ++j;
      }
      out.push_back({std::move(word), {cp.begin, cps[j - 1].end}});
      i = j;
      continue;
    }
    // CJK characters and every other symbol are single-character tokens
    out.push_back({std::string(text.substr(cp.begin, cp.end - cp.begin)), {cp.begin, cp.end}});
    ++i;
  }
  return out;
}

Vocab::Vocab() : Vocab(from_tokens(kReservedTokens)) {}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReserved ||
      !std::equal(kReservedTokens.begin(), kReservedTokens.end(), tokens.begin())) {
    throw DataError("vocabulary must start with [PAD] [UNK] [CLS] [SEP]");
  }
  Vocab v{Empty{}};
  v.tokens_ = std::move(tokens);
  v.index_.reserve(v.tokens_.size());
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i)).second) {
      throw DataError("duplicate vocabulary token: " + v.tokens_[i]);
    }
  }
  return v;
}

Vocab Vocab::build(std::span<const std::string> tokens, std::size_t min_freq,
                   std::size_t max_size) {
  if (max_size < kReserved) throw ConfigError("vocabulary max_size must be >= 4");
  if (min_freq < 1) throw ConfigError("vocabulary min_freq must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, count] : counts) {
    if (count < min_freq) continue;
    if (std::find(kReservedTokens.begin(), kReservedTokens.end(), token) != kReservedTokens.end())
      continue;
    ranked.emplace_back(token, count);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ordered = kReservedTokens;
  for (const auto& [token, count] : ranked) {
    if (ordered.size() >= max_size) break;
    ordered.push_back(token);
  }
  return from_tokens(std::move(ordered));
}

Vocab Vocab::build_from_texts(std::span<const std::string> texts, std::size_t min_freq,
                              std::size_t max_size) {
  std::vector<std::string> stream;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) stream.push_back(std::move(tok.text));
  }
  return build(stream, min_freq, max_size);
}

std::int32_t Vocab::id_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

void Vocab::write(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocab Vocab::read(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw DataError("vocab line " + std::to_string(line_no) + ": expected token<TAB>id");
    }
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocab line " + std::to_string(line_no) + ": bad id");
    }
    if (id != tokens.size()) {
      throw DataError("vocab line " + std::to_string(line_no) + ": ids must be contiguous");
    }
    tokens.push_back(line.substr(0, tab));
  }
  return from_tokens(std::move(tokens));
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab " + path.string());
  write(out);
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab " + path.string());
  return read(in);
}

std::size_t TokenSequence::real_length() const {
  return static_cast<std::size_t>(std::count(attention_mask.begin(), attention_mask.end(), 1));
}

TokenSequence encode_single(std::string_view text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 3) throw ConfigError("encode_single needs max_len >= 3");
  TokenSequence seq;
  push_special(Vocab::kCls, 0, seq);
  push_tokens(text, vocab, 0, max_len - 2, seq);
  push_special(Vocab::kSep, 0, seq);
  pad_to(max_len, seq);
  return seq;
}

TokenSequence encode_pair(std::string_view a, std::string_view b, const Vocab& vocab,
                          std::size_t max_len) {
  if (max_len < 4) throw ConfigError("encode_pair needs max_len >= 4");
  const std::size_t a_tokens = tokenize(a).size();
  if (a_tokens + 3 > max_len) {
    throw ConfigError("first segment has " + std::to_string(a_tokens) +
                      " tokens and does not fit max_len " + std::to_string(max_len));
  }
  TokenSequence seq;
  push_special(Vocab::kCls, 0, seq);
  push_tokens(a, vocab, 0, a_tokens, seq);
  push_special(Vocab::kSep, 0, seq);
  push_tokens(b, vocab, 1, max_len - 3 - a_tokens, seq);
  push_special(Vocab::kSep, 1, seq);
  pad_to(max_len, seq);
  return seq;
}

}  // namespace finkey
