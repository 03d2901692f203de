#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "finkey/errors.hpp"
#include "finkey/training.hpp"
#include "fixtures.hpp"

using namespace finkey;

namespace {

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out(std::ios::binary);
  write_checkpoint(out, c);
  return out.str();
}

// Texts whose label is fixed by a single word.
std::vector<Document> word_labelled(std::size_t n) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    const bool negative = i % 2 == 0;
    d.raw_text = negative ? "acme bank defaulted" : "acme bank profited";
    d.cleaned_text = d.raw_text;
    d.sentiment = negative ? SentimentLabel::Negative : SentimentLabel::Positive;
    docs.push_back(d);
  }
  return docs;
}

}  // namespace

TEST_CASE("train config validation and JSON form") {
  TrainConfig c;
  c.task = Task::Match;
  c.loss = LossKind::Focal;
  c.focal = {1.5, 0.3};
  c.learning_rate = 3e-4;
  c.threshold = 0.2;
  c.encoder.d_model = 48;
  c.seed = 123456789012345ull;
  CHECK_NOTHROW(c.validate());
  CHECK(train_config_from_json(train_config_to_json(c)) == c);
  CHECK(train_config_to_json(train_config_from_json(train_config_to_json(c))) == train_config_to_json(c));

  const auto partial = train_config_from_json(R"({"epochs": 7})", c);
  CHECK(partial.epochs == 7);
  CHECK(partial.learning_rate == c.learning_rate);

  auto bad = c;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.threshold = 1.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.task = Task::Sentiment;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.encoder.n_heads = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(train_config_from_json("{not json"), ConfigError);
}

TEST_CASE("kfold_split") {
  const auto ten = kfold_split(10, 10, 1);
  CHECK(ten.folds.size() == 10);
  for (const auto& f : ten.folds) CHECK(f.size() == 1);

  const auto three = kfold_split(10, 3, 5);
  std::multiset<std::size_t> sizes;
  for (const auto& f : three.folds) sizes.insert(f.size());
  CHECK(sizes == std::multiset<std::size_t>{3, 3, 4});

  CHECK_THROWS_AS(kfold_split(3, 4, 1), ConfigError);
  CHECK_THROWS_AS(kfold_split(5, 1, 1), ConfigError);
  CHECK(kfold_split(50, 5, 9).folds == kfold_split(50, 5, 9).folds);
  CHECK(kfold_split(50, 5, 9).folds != kfold_split(50, 5, 10).folds);

  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(200);
    const std::size_t k = 2 + rng.below(n - 1);
    const auto split = kfold_split(n, k, rng.next());
    REQUIRE(split.folds.size() == k);
    std::vector<std::size_t> all;
    std::size_t lo = n, hi = 0;
    for (const auto& f : split.folds) {
      all.insert(all.end(), f.begin(), f.end());
      lo = std::min(lo, f.size());
      hi = std::max(hi, f.size());
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(n);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("training runs") {
  const auto train_docs = fixtures::sentiment_docs(160, 1);
  const auto dev_docs = fixtures::sentiment_docs(40, 2);

  SUBCASE("identical runs give identical checkpoints, and the bytes round-trip") {
    const auto cfg = fixtures::tiny_config(Task::Sentiment, 2);
    const auto a = train(train_docs, dev_docs, cfg);
    const auto b = train(train_docs, dev_docs, cfg);
    const auto bytes = bytes_of(a.checkpoint);
    CHECK(bytes == bytes_of(b.checkpoint));
    CHECK(a.history.size() == 2);
    CHECK(a.checkpoint.dev_score >= 0.0);
    CHECK(a.checkpoint.dev_score <= 1.0);
    CHECK(a.checkpoint.dev_score == a.history[a.best_epoch - 1].dev_score);

    std::istringstream in(bytes, std::ios::binary);
    const auto back = read_checkpoint(in);
    CHECK(bytes_of(back) == bytes);
    CHECK(back.train_config == a.checkpoint.train_config);
    for (const auto& d : dev_docs) {
      const auto p = predict_sentiment(a.checkpoint.model, d.cleaned_text);
      const auto q = predict_sentiment(back.model, d.cleaned_text);
      CHECK(p.prob_negative == q.prob_negative);
      CHECK(p.label == q.label);
    }

    auto other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(bytes_of(train(train_docs, dev_docs, other).checkpoint) != bytes);
  }

  SUBCASE("a zero learning rate leaves the initial parameters") {
    auto cfg = fixtures::tiny_config(Task::Sentiment, 1);
    cfg.learning_rate = 0.0;
    const auto r = train(train_docs, dev_docs, cfg);
    Rng rng(cfg.seed);
    const auto init = init_params<float>(r.checkpoint.model.config, rng);
    const auto head = init_head<float>(Task::Sentiment, cfg.encoder.d_model, rng);
    std::vector<Matrix<float>> got, want;
    r.checkpoint.model.encoder.for_each([&](const std::string&, const Matrix<float>& m) { got.push_back(m); });
    init.for_each([&](const std::string&, const Matrix<float>& m) { want.push_back(m); });
    CHECK(got == want);
    CHECK(r.checkpoint.model.head.weight == head.weight);
  }

  SUBCASE("loss goes down on a learnable set") {
    auto cfg = fixtures::tiny_config(Task::Sentiment, 6);
    const auto r = train(train_docs, dev_docs, cfg);
    REQUIRE(r.history.size() == 6);
    CHECK(r.history.back().mean_loss < r.history.front().mean_loss);
  }

  SUBCASE("match and mrc tasks train and score") {
    auto match = fixtures::tiny_config(Task::Match, 1);
    match.loss = LossKind::Focal;
    const auto m = train(train_docs, dev_docs, match);
    CHECK(m.checkpoint.model.head.task == Task::Match);
    const auto tagged = fixtures::tagged_docs(80, 3);
    const auto mrc = train(tagged, fixtures::tagged_docs(20, 4), fixtures::tiny_config(Task::Mrc, 1));
    CHECK(mrc.checkpoint.model.head.task == Task::Mrc);
    CHECK(mrc.checkpoint.dev_score >= 0.0);
  }

  SUBCASE("divergence is reported with the batch index") {
    auto cfg = fixtures::tiny_config(Task::Sentiment, 1);
    cfg.learning_rate = 1e38;
    cfg.clip_norm = 1e30;
    try {
      train(train_docs, dev_docs, cfg);
      FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("batch") != std::string::npos);
    }
  }

  SUBCASE("empty inputs") {
    const auto cfg = fixtures::tiny_config(Task::Sentiment, 1);
    CHECK_THROWS(train({}, dev_docs, cfg));
    CHECK_THROWS(train(train_docs, {}, cfg));
  }
}

TEST_CASE("checkpoint files") {
  std::istringstream junk("not a checkpoint", std::ios::binary);
  CHECK_THROWS_AS(read_checkpoint(junk), DataError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/finkey.ckpt"), DataError);

  const auto r = train(fixtures::sentiment_docs(40, 1), fixtures::sentiment_docs(10, 2),
                       fixtures::tiny_config(Task::Sentiment, 1));
  const auto bytes = bytes_of(r.checkpoint);
  std::istringstream cut(bytes.substr(0, bytes.size() / 2), std::ios::binary);
  CHECK_THROWS_AS(read_checkpoint(cut), DataError);
}

TEST_CASE("cross-validation and neighbourhood search") {
  const auto docs = word_labelled(30);
  auto cfg = fixtures::tiny_config(Task::Sentiment, 8);
  cfg.learning_rate = 5e-3;
  cfg.encoder.dropout_rate = 0.0;

  SUBCASE("a perfectly learnable set scores 1 on every fold") {
    const auto cv = cross_validate(docs, cfg, 3);
    REQUIRE(cv.fold_scores.size() == 3);
    for (double s : cv.fold_scores) CHECK(s == 1.0);
    CHECK(cv.mean == 1.0);
  }
  SUBCASE("k entries and an arithmetic mean, same result with threads") {
    auto quick = cfg;
    quick.epochs = 1;
    const auto docs2 = fixtures::sentiment_docs(50, 9);
    const auto cv = cross_validate(docs2, quick, 5);
    REQUIRE(cv.fold_scores.size() == 5);
    const double mean = std::accumulate(cv.fold_scores.begin(), cv.fold_scores.end(), 0.0) / 5.0;
    CHECK(std::abs(cv.mean - mean) <= 1e-12);
    const auto threaded = cross_validate(docs2, quick, 5, 3);
    CHECK(threaded.fold_scores == cv.fold_scores);
    CHECK_THROWS_AS(cross_validate(docs2, quick, 1), ConfigError);
  }
  SUBCASE("a one-point grid returns the base configuration") {
    auto quick = cfg;
    quick.epochs = 1;
    const auto r = neighborhood_search(quick, SearchGrid{{1.0}, {1.0}}, docs, 2);
    CHECK(r.table.size() == 1);
    CHECK(r.best == quick);
    CHECK_THROWS_AS(neighborhood_search(quick, SearchGrid{{}, {1.0}}, docs, 2), ConfigError);
  }
  SUBCASE("grid table and argmax") {
    auto quick = cfg;
    quick.epochs = 1;
    const auto r = neighborhood_search(quick, SearchGrid{{0.5, 1.0, 2.0}, {1.0, 2.0}}, docs, 2);
    CHECK(r.table.size() == 6);
    double base = -1, best = -1;
    for (const auto& row : r.table) {
      if (row.changed == 0) base = row.scores.mean;
      best = std::max(best, row.scores.mean);
    }
    CHECK(r.table[r.best_row].scores.mean == best);
    CHECK(best >= base);
    CHECK(r.best.learning_rate == r.table[r.best_row].learning_rate);
    CHECK(r.best.batch_size == r.table[r.best_row].batch_size);
  }
}
