#include "finkey/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <string>
#include <string_view>

#include "finkey/rng.hpp"

namespace finkey::synthetic {

namespace {

constexpr std::array<std::string_view, 20> kFirstNames = {
    "acme",   "apex",    "boreal",  "cobalt",   "delta", "ember",  "falcon",
    "granite", "harbor", "juniper", "kestrel", "lumen", "meridian", "nova",
    "orion",  "quartz",  "raven",   "summit",  "titan", "zephyr"};
constexpr std::array<std::string_view, 8> kSuffixes = {
    "bank", "capital", "group", "securities", "holdings", "trust", "finance", "insurance"};
constexpr std::array<std::string_view, 8> kCjkNames = {
    "泰和银行", "嘉禾证券", "瑞丰保险", "恒通信托", "汇源资本", "鼎盛集团", "华信金融", "永安控股"};

constexpr std::array<std::string_view, 6> kNegativeEvents = {
    "defaulted", "collapsed", "faltered", "slumped", "plunged", "stumbled"};
constexpr std::array<std::string_view, 6> kPositiveEvents = {
    "profited", "expanded", "rallied", "thrived", "recovered", "soared"};
constexpr std::string_view kNegator = "never";
constexpr std::array<std::string_view, 6> kFillers = {"", " this quarter", " last year", " again",
                                                      " in march", " sharply"};
constexpr std::array<std::string_view, 5> kConnectors = {" and ", " while ", ", ", " ; ", " but "};

constexpr std::array<std::string_view, 8> kTags = {"fraud",   "default",     "lawsuit",
                                                   "bankruptcy", "penalty", "delisting",
                                                   "embezzlement", "insolvency"};
constexpr std::array<std::string_view, 5> kTagVerbs = {"faces", "is hit by", "reports",
                                                       "is linked to", "confirms"};

std::vector<std::string> pick_companies(Rng& rng, std::size_t count, double cjk_rate) {
  std::vector<std::size_t> firsts(kFirstNames.size());
  for (std::size_t i = 0; i < firsts.size(); ++i) firsts[i] = i;
  rng.shuffle(firsts.begin(), firsts.end());
  std::vector<std::size_t> cjk(kCjkNames.size());
  for (std::size_t i = 0; i < cjk.size(); ++i) cjk[i] = i;
  rng.shuffle(cjk.begin(), cjk.end());
  std::vector<std::string> out;
  std::size_t next_latin = 0, next_cjk = 0;
  for (std::size_t i = 0; i < count; ++i) {
    if (rng.bernoulli(cjk_rate) && next_cjk < cjk.size()) {
      out.emplace_back(kCjkNames[cjk[next_cjk++]]);
    } else {
      out.push_back(std::string(kFirstNames[firsts[next_latin++]]) + " " +
                    std::string(rng.pick(kSuffixes)));
    }
  }
  return out;
}

std::string add_noise(std::string text, Rng& rng) {
  switch (rng.below(3)) {
    case 0:
      return text + " see https://news.example.com/item" + std::to_string(rng.below(10000));
    case 1: {
      const auto pos = text.find(' ');
      if (pos != std::string::npos) text.replace(pos, 1, " \t ");
      return "  " + text;
    }
    default:
      return "www.finance-news.example " + text + "​";
  }
}

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, i);
  return buf;
}

}  // namespace

std::vector<Document> sentiment_entity_corpus(const Options& options) {
  Rng rng(options.seed);
  std::vector<Document> docs;
  docs.reserve(options.documents);
  for (std::size_t d = 0; d < options.documents; ++d) {
    const bool negative = rng.bernoulli(0.5);
    const double u = rng.uniform();
    const std::size_t clauses = u < 0.1 ? 1 : (u < 0.6 ? 2 : 3);
    std::vector<bool> clause_negative(clauses, false);
    if (negative) {
      // mostly mixed texts, so entity-level labels differ from the text label
      const std::size_t count = clauses == 1 ? 1 : 1 + rng.below(clauses - 1);
      for (std::size_t i = 0; i < count; ++i) clause_negative[i] = true;
      rng.shuffle(clause_negative.begin(), clause_negative.end());
    }
    const auto companies = pick_companies(rng, clauses + 1, options.cjk_name_rate);

    std::string text;
    std::vector<std::string> keys;
    for (std::size_t c = 0; c < clauses; ++c) {
      const bool negated = rng.bernoulli(options.negation_rate);
      const bool word_negative = clause_negative[c] != negated;
      if (c > 0) text += rng.pick(kConnectors);
      text += companies[c];
      if (negated) text += " " + std::string(kNegator);
      text += " " + std::string(word_negative ? rng.pick(kNegativeEvents) : rng.pick(kPositiveEvents));
      text += rng.pick(kFillers);
      if (clause_negative[c]) keys.push_back(companies[c]);
    }

    std::vector<std::string> entity_list(companies.begin(), companies.begin() + static_cast<std::ptrdiff_t>(clauses));
    // occasionally the list names a company the text never mentions
    if (rng.bernoulli(options.absent_entity_rate)) entity_list.push_back(companies[clauses]);
    rng.shuffle(entity_list.begin(), entity_list.end());
    std::vector<std::string> ordered_keys;
    for (const auto& e : entity_list)
      if (std::find(keys.begin(), keys.end(), e) != keys.end()) ordered_keys.push_back(e);

    Document doc;
    doc.id = make_id("s", d);
    doc.raw_text = rng.bernoulli(options.noise_rate) ? add_noise(text, rng) : text;
    doc.cleaned_text = clean_text(doc.raw_text);
    doc.sentiment = negative ? SentimentLabel::Negative : SentimentLabel::Positive;
    doc.entity_list = std::move(entity_list);
    doc.key_entities = std::move(ordered_keys);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> tagged_corpus(const Options& options) {
  Rng rng(options.seed);
  std::vector<Document> docs;
  docs.reserve(options.documents);
  for (std::size_t d = 0; d < options.documents; ++d) {
    const std::size_t clauses = rng.bernoulli(0.5) ? 2 : 3;
    const auto companies = pick_companies(rng, clauses, options.cjk_name_rate);
    std::vector<std::size_t> tags(kTags.size());
    for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = i;
    rng.shuffle(tags.begin(), tags.end());

    std::string text;
    for (std::size_t c = 0; c < clauses; ++c) {
      if (c > 0) text += rng.pick(kConnectors);
      text += companies[c] + " " + std::string(rng.pick(kTagVerbs)) + " " +
              std::string(kTags[tags[c]]) + std::string(rng.pick(kFillers));
    }
    const std::size_t target = rng.below(clauses);

    Document doc;
    doc.id = make_id("t", d);
    doc.raw_text = rng.bernoulli(options.noise_rate) ? add_noise(text, rng) : text;
    doc.cleaned_text = clean_text(doc.raw_text);
    doc.sentiment = SentimentLabel::Negative;
    doc.tag = std::string(kTags[tags[target]]);
    doc.key_entities = std::vector<std::string>{companies[target]};
    docs.push_back(std::move(doc));
  }
  return docs;
}

Lexicon company_lexicon() {
  Lexicon lexicon;
  for (auto first : kFirstNames)
    for (auto suffix : kSuffixes) lexicon.add(std::string(first) + " " + std::string(suffix));
  for (auto name : kCjkNames) lexicon.add(name);
  return lexicon;
}

}  // namespace finkey::synthetic
