#include "finkey/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "finkey/errors.hpp"
#include "finkey/tasks.hpp"
#include "finkey/utf8.hpp"

namespace finkey {

using nlohmann::json;

std::string_view to_string(SentimentLabel label) {
  return label == SentimentLabel::Negative ? "negative" : "positive";
}

std::optional<SentimentLabel> parse_sentiment(std::string_view text) {
  if (text == "negative") return SentimentLabel::Negative;
  if (text == "positive") return SentimentLabel::Positive;
  return std::nullopt;
}

std::string_view to_string(Schema schema) {
  return schema == Schema::Dataset1 ? "dataset-1" : "dataset-2";
}

std::optional<Schema> parse_schema(std::string_view text) {
  if (text == "dataset-1") return Schema::Dataset1;
  if (text == "dataset-2") return Schema::Dataset2;
  return std::nullopt;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

constexpr std::array<std::string_view, 4> kUrlPrefixes = {"http://", "https://", "ftp://",
                                                          "www."};

std::string strip_urls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool is_url = false;
    for (auto prefix : kUrlPrefixes) {
      if (text.substr(i, prefix.size()) == prefix) {
        is_url = true;
        break;
      }
    }
    if (!is_url) {
      out.push_back(text[i++]);
      continue;
    }
    // the only whitespace left at this stage is ASCII space
    while (i < text.size() && text[i] != ' ') ++i;
  }
  return out;
}

std::optional<std::vector<std::string>> string_list(const json& record, const char* key,
                                                    std::string& error) {
  if (!record.contains(key) || record[key].is_null()) return std::nullopt;
  const json& value = record[key];
  if (!value.is_array()) {
    error = std::string(key) + " must be an array of strings";
    return std::nullopt;
  }
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      error = std::string(key) + " must be an array of strings";
      return std::nullopt;
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  // 1. drop controls/invisibles/malformed bytes, map every whitespace to ' '
  std::string visible;
  visible.reserve(raw.size());
  for (const auto& cp : utf8::decode(raw)) {
    if (!cp.valid || utf8::is_control_or_invisible(cp.value)) continue;
    if (utf8::is_whitespace(cp.value)) {
      visible.push_back(' ');
    } else {
      visible.append(raw.substr(cp.begin, cp.end - cp.begin));
    }
  }
  // 2. URLs
  const std::string no_urls = strip_urls(visible);
  // 3. collapse and trim
  std::string out;
  out.reserve(no_urls.size());
  for (char c : no_urls) {
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(c);
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Lexicon::Lexicon(const std::vector<std::string>& entries) {
  for (const auto& e : entries) add(e);
}

bool Lexicon::add(std::string_view entry) {
  const auto trimmed = trim(entry);
  if (trimmed.empty()) return false;
  return entries_.emplace(trimmed).second;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon " + path.string());
  Lexicon lexicon;
  std::string line;
  while (std::getline(in, line)) lexicon.add(line);
  return lexicon;
}

LoadResult parse_corpus(std::istream& in, Schema schema) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++result.lines;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record["id"].is_string() ||
        !record.contains("text") || !record["text"].is_string()) {
      throw DataError("line " + std::to_string(line_no) +
                      ": malformed record: expected object with string id and text");
    }

    Document doc;
    doc.id = record["id"].get<std::string>();
    doc.raw_text = record["text"].get<std::string>();
    doc.cleaned_text = clean_text(doc.raw_text);

    std::vector<std::string> problems;
    auto report = [&](std::string message) { problems.push_back(std::move(message)); };

    if (!seen.insert(doc.id).second) report("duplicate id");

    if (record.contains("sentiment") && !record["sentiment"].is_null()) {
      const auto& value = record["sentiment"];
      auto label = value.is_string() ? parse_sentiment(value.get<std::string>()) : std::nullopt;
      if (!label) report("sentiment must be \"negative\" or \"positive\"");
      doc.sentiment = label;
    }
    std::string list_error;
    doc.entity_list = string_list(record, "entity_list", list_error);
    if (!list_error.empty()) report(list_error);
    list_error.clear();
    doc.key_entities = string_list(record, "key_entities", list_error);
    if (!list_error.empty()) report(list_error);
    if (record.contains("tag") && !record["tag"].is_null()) {
      if (record["tag"].is_string()) doc.tag = record["tag"].get<std::string>();
      else report("tag must be a string");
    }

    if (doc.entity_list && doc.key_entities) {
      for (const auto& key : *doc.key_entities) {
        if (std::find(doc.entity_list->begin(), doc.entity_list->end(), key) ==
            doc.entity_list->end()) {
          report("key entity \"" + key + "\" not in entity_list");
        }
      }
    }
    if (doc.entity_list) {
      for (const auto& e : *doc.entity_list) {
        if (e.empty()) report("empty entity in entity_list");
      }
    }
    if (schema == Schema::Dataset2) {
      if (!doc.tag) report("dataset-2 record requires a tag");
      if (doc.sentiment == SentimentLabel::Positive) report("dataset-2 records are negative");
    }

    if (problems.empty()) {
      result.documents.push_back(std::move(doc));
    } else {
      for (auto& p : problems) result.errors.push_back({line_no, doc.id, std::move(p)});
    }
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path, Schema schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return parse_corpus(in, schema);
}

void write_corpus(std::ostream& out, std::span<const Document> docs) {
  for (const auto& doc : docs) {
    json record;
    record["id"] = doc.id;
    record["text"] = doc.raw_text;
    if (doc.sentiment) record["sentiment"] = std::string(to_string(*doc.sentiment));
    if (doc.entity_list) record["entity_list"] = *doc.entity_list;
    if (doc.key_entities) record["key_entities"] = *doc.key_entities;
    if (doc.tag) record["tag"] = *doc.tag;
    out << record.dump() << '\n';
  }
}

void save_corpus(const std::filesystem::path& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus " + path.string());
  write_corpus(out, docs);
}

std::vector<std::string> rule_match_entities(std::string_view text, const Lexicon& lexicon) {
  std::vector<std::string> found;
  if (text.empty()) return found;
  for (const auto& entry : lexicon.entries()) {
    if (text.find(entry) != std::string_view::npos) found.push_back(entry);
  }
  // std::set iteration is already sorted and unique
  return found;
}

PairDataset build_pair_dataset(std::span<const Document> docs) {
  PairDataset out;
  for (const auto& doc : docs) {
    if (!doc.entity_list) {
      ++out.skipped_docs;
      continue;
    }
    for (const auto& entity : *doc.entity_list) {
      PairExample ex{doc.id, entity, doc.cleaned_text, std::nullopt};
      if (doc.key_entities) {
        const bool key = std::find(doc.key_entities->begin(), doc.key_entities->end(), entity) !=
                         doc.key_entities->end();
        ex.label = key ? 1 : 0;
      }
      out.examples.push_back(std::move(ex));
    }
  }
  return out;
}

MrcDataset build_mrc_dataset(std::span<const Document> docs, std::string_view question_template) {
  MrcDataset out;
  for (const auto& doc : docs) {
    if (!doc.tag) throw DataError("document " + doc.id + " has no tag");
    MrcExample ex{doc.id, build_question(*doc.tag, question_template), doc.cleaned_text,
                  std::nullopt};
    if (doc.key_entities) {
      if (doc.key_entities->size() != 1 || (*doc.key_entities)[0].empty()) {
        ++out.dropped;
        continue;
      }
      const auto& gold = (*doc.key_entities)[0];
      const auto pos = doc.cleaned_text.find(gold);
      if (pos == std::string::npos) {
        ++out.dropped;
        continue;
      }
      ex.answer = CharSpan{pos, pos + gold.size()};
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

}  // namespace finkey
