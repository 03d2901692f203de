#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "finkey/corpus.hpp"

namespace finkey::synthetic {

struct Options {
  std::size_t documents = 1000;
  std::uint64_t seed = 1;
  double cjk_name_rate = 0.15;  // share of company names written in CJK
  double noise_rate = 0.1;      // share of raw texts with URLs/odd spacing
  double negation_rate = 0.4;   // chance that a clause carries "never"
  double absent_entity_rate = 0.3;  // chance the entity list names an unmentioned company
};

/// Dataset-1 style texts: two or three clauses "<company> [never] <event>".
/// An event word has a polarity and "never" flips it; the text is negative
/// iff some clause ends up negative, and the key entities are the companies
/// of the negative clauses. Half the texts are negative. Because the
/// negator can attach to either clause, a bag of words cannot recover the
/// label for many texts.
std::vector<Document> sentiment_entity_corpus(const Options& options);

/// Dataset-2 style texts: two or three clauses "<company> <verb> <tag>"
/// with distinct tags; the document tag picks one clause and its company
/// is the single key entity.
std::vector<Document> tagged_corpus(const Options& options);

/// Every company name the generators can emit.
Lexicon company_lexicon();

}  // namespace finkey::synthetic
