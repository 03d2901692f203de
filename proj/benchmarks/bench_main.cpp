#include <benchmark/benchmark.h>

#include "finkey/corpus.hpp"
#include "finkey/encoder.hpp"
#include "finkey/metrics.hpp"
#include "finkey/synthetic.hpp"
#include "finkey/tasks.hpp"
#include "finkey/tokenizer.hpp"

using namespace finkey;

namespace {

std::vector<Document> corpus(std::size_t n) {
  synthetic::Options o;
  o.documents = n;
  return synthetic::sentiment_entity_corpus(o);
}

void BM_CleanText(benchmark::State& state) {
  const auto docs = corpus(200);
  std::size_t bytes = 0;
  for (auto _ : state) {
    for (const auto& d : docs) {
      auto s = clean_text(d.raw_text);
      bytes += s.size();
      benchmark::DoNotOptimize(s);
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_CleanText);

void BM_EncodePair(benchmark::State& state) {
  const auto docs = corpus(200);
  std::vector<std::string> texts;
  for (const auto& d : docs) texts.push_back(d.cleaned_text);
  const auto vocab = Vocab::build_from_texts(texts, 1, 1000);
  for (auto _ : state) {
    for (const auto& d : docs) benchmark::DoNotOptimize(encode_pair(d.entity_list->front(), d.cleaned_text, vocab, 64));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(docs.size()));
}
BENCHMARK(BM_EncodePair);

// Forward pass of one padded sequence; argument is d_model.
void BM_Forward(benchmark::State& state) {
  const auto docs = corpus(50);
  std::vector<std::string> texts;
  for (const auto& d : docs) texts.push_back(d.cleaned_text);
  const auto vocab = Vocab::build_from_texts(texts, 1, 1000);
  EncoderConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.d_model = static_cast<std::size_t>(state.range(0));
  cfg.n_heads = 4;
  cfg.n_layers = 2;
  cfg.d_ff = 4 * cfg.d_model;
  cfg.max_len = 64;
  const auto params = init_params<float>(cfg, 1);
  const auto seq = encode_single(docs[0].cleaned_text, vocab, 64);
  for (auto _ : state) {
    if (state.range(1)) benchmark::DoNotOptimize(forward_real(params, cfg, seq, false, nullptr));
    else benchmark::DoNotOptimize(forward(params, cfg, seq, false, nullptr));
  }
}
BENCHMARK(BM_Forward)->ArgNames({"d_model", "real_rows"})->ArgsProduct({{32, 64}, {0, 1}});

void BM_EntityPrf(benchmark::State& state) {
  std::vector<EntitySet> pred, gold;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EntitySet p, g;
    for (int k = 0; k < 3; ++k) {
      p.insert("e" + std::to_string(rng.below(6)));
      g.insert("e" + std::to_string(rng.below(6)));
    }
    pred.push_back(p);
    gold.push_back(g);
  }
  for (auto _ : state) benchmark::DoNotOptimize(entity_prf(pred, gold));
}
BENCHMARK(BM_EntityPrf);

void BM_BestSpan(benchmark::State& state) {
  const std::size_t n = 128;
  std::vector<double> s(n), e(n);
  std::vector<std::uint8_t> valid(n, 1);
  Rng rng(2);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.uniform();
    e[i] = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(best_span(s, e, valid, kDefaultMaxSpanLen));
}
BENCHMARK(BM_BestSpan);

}  // namespace

BENCHMARK_MAIN();
