#pragma once

#include <string>
#include <vector>

#include "finkey/synthetic.hpp"
#include "finkey/tasks.hpp"
#include "finkey/training.hpp"

namespace fixtures {

// Untrained model with a vocabulary over `texts`, for tests that only need
// a well-formed model.
inline finkey::TaskModel random_model(finkey::Task task, const std::vector<std::string>& texts,
                                      std::uint64_t seed = 1, std::size_t max_len = 48) {
  finkey::TaskModel m;
  m.vocab = finkey::Vocab::build_from_texts(texts, 1, 1000);
  m.config.vocab_size = m.vocab.size();
  m.config.d_model = 16;
  m.config.n_heads = 2;
  m.config.n_layers = 1;
  m.config.d_ff = 32;
  m.config.max_len = max_len;
  m.config.dropout_rate = 0.0;
  finkey::Rng rng(seed);
  m.encoder = finkey::init_params<float>(m.config, rng);
  m.head = finkey::init_head<float>(task, m.config.d_model, rng);
  return m;
}

// A small, fast training configuration.
inline finkey::TrainConfig tiny_config(finkey::Task task, std::size_t epochs = 2, std::uint64_t seed = 3) {
  finkey::TrainConfig c;
  c.task = task;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = seed;
  c.max_len = 32;
  c.encoder.d_model = 16;
  c.encoder.n_heads = 2;
  c.encoder.n_layers = 1;
  c.encoder.d_ff = 32;
  c.encoder.dropout_rate = 0.1;
  return c;
}

inline std::vector<finkey::Document> sentiment_docs(std::size_t n, std::uint64_t seed) {
  finkey::synthetic::Options o;
  o.documents = n;
  o.seed = seed;
  return finkey::synthetic::sentiment_entity_corpus(o);
}

inline std::vector<finkey::Document> tagged_docs(std::size_t n, std::uint64_t seed) {
  finkey::synthetic::Options o;
  o.documents = n;
  o.seed = seed;
  return finkey::synthetic::tagged_corpus(o);
}

}  // namespace fixtures
