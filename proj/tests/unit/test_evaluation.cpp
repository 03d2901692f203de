#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "finkey/classical.hpp"
#include "finkey/ensemble.hpp"
#include "finkey/errors.hpp"
#include "finkey/metrics.hpp"
#include "finkey/pipeline.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace finkey;

namespace {

constexpr auto Neg = SentimentLabel::Negative;
constexpr auto Pos = SentimentLabel::Positive;

SentimentPrediction member(double p) { return {p >= 0.5 ? Neg : Pos, p}; }

// Untrained checkpoint whose head bias pins the decision.
Checkpoint pinned(Task task, double bias, std::uint64_t seed = 1) {
  Checkpoint c;
  c.model = fixtures::random_model(task, {"acme bank defaulted while nova trust rallied", "泰和银行 faces fraud"}, seed);
  c.model.head.bias.setZero();
  c.model.head.weight.setZero();
  c.model.head.bias(0, 0) = static_cast<float>(bias);
  c.train_config.task = task;
  c.seed = seed;
  return c;
}

Document doc(std::string id, std::string text, std::optional<std::vector<std::string>> entities) {
  Document d;
  d.id = std::move(id);
  d.raw_text = text;
  d.cleaned_text = text;
  d.entity_list = std::move(entities);
  return d;
}

}  // namespace

TEST_CASE("accuracy and exact match") {
  const std::vector<SentimentLabel> p = {Neg, Pos, Neg, Neg}, g = {Neg, Pos, Pos, Neg};
  CHECK(accuracy(p, g) == 0.75);
  CHECK(accuracy(g, g) == 1.0);
  CHECK_THROWS_AS(accuracy(std::span(p).first(2), g), ConfigError);
  CHECK_THROWS_AS(accuracy({}, {}), ConfigError);
  const std::vector<std::string> a = {"x", "y"}, b = {"x", "z"};
  CHECK(exact_match(a, b) == 0.5);
  CHECK_THROWS_AS(exact_match(std::span(a).first(1), b), ConfigError);
}

TEST_CASE("entity_prf") {
  SUBCASE("worked example") {
    const std::vector<EntitySet> pred = {{"A", "B"}, {"C"}}, gold = {{"A"}, {"C", "D"}};
    const auto m = entity_prf(pred, gold);
    CHECK(m.tp == 2);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("zero denominators give zero") {
    const std::vector<EntitySet> none = {{}, {}};
    const auto m = entity_prf(none, none);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    const std::vector<EntitySet> some = {{"A"}, {}};
    CHECK(entity_prf(none, some).recall == 0.0);
    CHECK(entity_prf(none, some).precision == 0.0);
    CHECK(entity_prf(some, none).f1 == 0.0);
    CHECK(entity_prf({}, {}).f1 == 0.0);
  }
  SUBCASE("random collections against set arithmetic") {
    Rng rng(31);
    for (int t = 0; t < 300; ++t) {
      std::vector<EntitySet> pred, gold;
      for (std::size_t i = 0, n = rng.below(6); i < n; ++i) {
        pred.push_back(oracle::random_set(rng));
        gold.push_back(oracle::random_set(rng));
      }
      const auto m = entity_prf(pred, gold);
      const auto o = oracle::prf(pred, gold);
      CHECK(m.tp == o.tp);
      CHECK(m.fp == o.fp);
      CHECK(m.fn == o.fn);
      CHECK(m.precision == o.precision);
      CHECK(m.recall == o.recall);
      CHECK(m.f1 == o.f1);
      if (m.tp + m.fp + m.fn > 0) {
        const double identity = 2.0 * m.tp / (2.0 * m.tp + m.fp + m.fn);
        CHECK(std::abs(m.f1 - identity) < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(entity_prf(std::vector<EntitySet>(2), std::vector<EntitySet>(1)), ConfigError);
}

TEST_CASE("classical baselines") {
  Rng rng(4);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2;
    const double c = label ? 2.0 : -2.0;
    x.push_back({c + rng.uniform(-0.8, 0.8), c + rng.uniform(-0.8, 0.8)});
    y.push_back(label);
  }
  for (auto kind : {ClassicalKind::Logistic, ClassicalKind::LinearSvm, ClassicalKind::NaiveBayes}) {
    CAPTURE(to_string(kind));
    const auto clf = classical_fit(kind, x, y);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) correct += classical_predict(clf, x[i]) == y[i];
    const double acc = static_cast<double>(correct) / static_cast<double>(x.size());
    CHECK(acc == clf.training_accuracy);
    if (kind != ClassicalKind::NaiveBayes) CHECK(acc == 1.0);
    CHECK(parse_classical_kind(to_string(kind)) == kind);
  }

  SUBCASE("naive Bayes on symmetric classes splits at the midpoint") {
    // class 0 at -1 and class 1 at +3, same spread: boundary at x = 1
    std::vector<std::vector<double>> v = {{-2}, {0}, {-1}, {2}, {4}, {3}};
    std::vector<int> l = {0, 0, 0, 1, 1, 1};
    const auto nb = classical_fit(ClassicalKind::NaiveBayes, v, l);
    CHECK(classical_predict(nb, std::vector<double>{0.9}) == 0);
    CHECK(classical_predict(nb, std::vector<double>{1.1}) == 1);
    CHECK(classical_predict(nb, std::vector<double>{-5}) == 0);
    CHECK(classical_predict(nb, std::vector<double>{7}) == 1);
  }
  SUBCASE("input errors") {
    const std::vector<int> one_class(x.size(), 1);
    CHECK_THROWS_AS(classical_fit(ClassicalKind::Logistic, x, one_class), ConfigError);
    CHECK_THROWS_AS(classical_fit(ClassicalKind::Logistic, x, std::span(y).first(3)), ConfigError);
    auto ragged = x;
    ragged[3].push_back(1.0);
    CHECK_THROWS_AS(classical_fit(ClassicalKind::LinearSvm, ragged, y), ConfigError);
  }
}

TEST_CASE("sentiment voting") {
  std::vector<SentimentPrediction> seven_three;
  for (int i = 0; i < 7; ++i) seven_three.push_back(member(0.8));
  for (int i = 0; i < 3; ++i) seven_three.push_back(member(0.1));
  CHECK(vote_sentiment(seven_three).label == Neg);
  CHECK(vote_sentiment(seven_three).prob_negative == doctest::Approx(0.59));

  std::vector<SentimentPrediction> tie;
  for (int i = 0; i < 5; ++i) tie.push_back(member(0.9));
  for (int i = 0; i < 5; ++i) tie.push_back(member(0.32));
  CHECK(vote_sentiment(tie).prob_negative == doctest::Approx(0.61));
  CHECK(vote_sentiment(tie).label == Neg);

  std::vector<SentimentPrediction> low_tie = {member(0.6), member(0.2)};
  CHECK(vote_sentiment(low_tie).label == Pos);
  CHECK_THROWS_AS(vote_sentiment({}), ConfigError);

  Rng rng(8);
  for (int t = 0; t < 1000; ++t) {
    const auto members = oracle::random_members(rng);
    CHECK(vote_sentiment(members).label == oracle::vote(members));
    if (members.size() % 2 == 1) {
      // an odd count is decided by the majority alone
      const auto neg = std::count_if(members.begin(), members.end(), [](auto& m) { return m.label == Neg; });
      CHECK((vote_sentiment(members).label == Neg) == (2 * static_cast<std::size_t>(neg) > members.size()));
    }
  }
}

TEST_CASE("key-entity voting") {
  auto scores = [](std::vector<double> s) {
    std::vector<MatchPrediction> out;
    const char* names[] = {"A", "B", "C"};
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({names[i], s[i], s[i] >= 0.5});
    return out;
  };
  const std::vector<std::vector<MatchPrediction>> members = {scores({0.9, 0.4, 0.6}), scores({0.7, 0.6, 0.1}),
                                                             scores({0.2, 0.3, 0.55})};
  CHECK(vote_key_entities(members, 0.5) == std::vector<std::string>{"A", "C"});
  CHECK(vote_key_entities(members, 0.2) == std::vector<std::string>{"A", "B", "C"});
  CHECK(average_key_entities(members, 0.5) == std::vector<std::string>{"A"});
  // two of four is not a strict majority
  auto four = members;
  four.push_back(scores({0.8, 0.9, 0.1}));
  CHECK(vote_key_entities(four, 0.5) == std::vector<std::string>{"A"});
  auto mismatched = members;
  mismatched[1].pop_back();
  CHECK_THROWS_AS(vote_key_entities(mismatched, 0.5), ConfigError);
}

TEST_CASE("member ranking and ensemble specs") {
  const std::vector<MemberScore> m = {{10, 0.8}, {3, 0.9}, {7, 0.8}, {1, 0.5}};
  CHECK(rank_members(m) == std::vector<std::size_t>{1, 2, 0, 3});

  EnsembleSpec spec;
  for (std::uint64_t s = 1; s <= 12; ++s) spec.seeds.push_back(s);
  spec.top_m = 10;
  CHECK_NOTHROW(spec.validate());
  spec.top_m = 13;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.top_m = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.top_m = 2;
  spec.seeds.push_back(3);
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("ensemble_train_select keeps the best members") {
  const auto train_docs = fixtures::sentiment_docs(80, 1);
  const auto dev_docs = fixtures::sentiment_docs(30, 2);
  const auto cfg = fixtures::tiny_config(Task::Sentiment, 1);
  EnsembleSpec spec;
  for (std::uint64_t s = 1; s <= 12; ++s) spec.seeds.push_back(s);
  spec.top_m = 10;
  const auto r = ensemble_train_select(train_docs, dev_docs, cfg, spec);
  CHECK(r.selected.size() == 10);
  CHECK(r.members.size() == 12);
  double worst_kept = 1.0, best_dropped = 0.0;
  for (const auto& m : r.members) {
    if (m.selected) worst_kept = std::min(worst_kept, m.dev_score);
    else best_dropped = std::max(best_dropped, m.dev_score);
  }
  CHECK(worst_kept >= best_dropped);
  for (std::size_t i = 0; i < r.selected.size(); ++i) CHECK(r.selected[i].seed == r.members[i].seed);

  const auto threaded = ensemble_train_select(train_docs, dev_docs, cfg, spec, 3);
  for (std::size_t i = 0; i < r.members.size(); ++i) {
    CHECK(threaded.members[i].seed == r.members[i].seed);
    CHECK(threaded.members[i].dev_score == r.members[i].dev_score);
  }
}

TEST_CASE("pipeline") {
  const auto negative = pinned(Task::Sentiment, 50.0);
  const auto positive = pinned(Task::Sentiment, -50.0);
  const auto all_keys = pinned(Task::Match, 50.0);
  const auto no_keys = pinned(Task::Match, -50.0);
  const std::vector<Document> docs = {
      doc("a", "acme bank defaulted", std::vector<std::string>{"acme bank", "nova trust"}),
      doc("b", "nova trust rallied", std::vector<std::string>{}),
      doc("c", "泰和银行 faces fraud", std::nullopt),
  };
  PipelineOptions opts;

  SUBCASE("empty input gives empty output") {
    const auto r = run_pipeline({}, std::span(&negative, 1), std::span(&all_keys, 1), nullptr, opts);
    CHECK(r.documents.empty());
    CHECK(r.processed == 0);
  }
  SUBCASE("positive texts stop after stage one") {
    const auto r = run_pipeline(docs, std::span(&positive, 1), std::span(&all_keys, 1), nullptr, opts);
    CHECK(r.filtered_positive == 3);
    for (const auto& d : r.documents) CHECK_FALSE(d.key_entities.has_value());
  }
  SUBCASE("negative texts get entity lists, warnings and errors") {
    Lexicon lexicon;
    lexicon.add("泰和银行");
    opts.lexicon = &lexicon;
    const auto r = run_pipeline(docs, std::span(&negative, 1), std::span(&all_keys, 1), nullptr, opts);
    REQUIRE(r.documents.size() == 3);
    CHECK(r.documents[0].key_entities == std::vector<std::string>{"acme bank", "nova trust"});
    CHECK(r.documents[1].key_entities == std::vector<std::string>{});
    CHECK(r.documents[1].warning);
    CHECK(r.documents[2].key_entities == std::vector<std::string>{"泰和银行"});
    CHECK(r.warnings == 1);

    opts.lexicon = nullptr;
    const auto r2 = run_pipeline(docs, std::span(&negative, 1), std::span(&no_keys, 1), nullptr, opts);
    CHECK(r2.documents[0].key_entities == std::vector<std::string>{});
    CHECK(r2.documents[2].error.has_value());
    CHECK(r2.errors == 1);
  }
  SUBCASE("order and results do not depend on the thread count") {
    std::vector<Document> many;
    for (int i = 0; i < 40; ++i) {
      many.push_back(doc("d" + std::to_string(i), i % 3 ? "acme bank defaulted" : "nova trust rallied",
                         std::vector<std::string>{"acme bank", "nova trust"}));
    }
    const std::vector<Checkpoint> sent = {pinned(Task::Sentiment, 0.0, 1), pinned(Task::Sentiment, 0.0, 2)};
    std::vector<Checkpoint> match = {pinned(Task::Match, 0.0, 3)};
    match[0].model.head.weight.setConstant(0.3f);
    const auto one = run_pipeline(many, sent, match, nullptr, opts);
    opts.threads = 4;
    const auto four = run_pipeline(many, sent, match, nullptr, opts);
    REQUIRE(four.documents.size() == many.size());
    for (std::size_t i = 0; i < many.size(); ++i) {
      CHECK(four.documents[i].id == many[i].id);
      CHECK(four.documents[i].sentiment.prob_negative == one.documents[i].sentiment.prob_negative);
      CHECK(four.documents[i].key_entities == one.documents[i].key_entities);
    }
  }
  SUBCASE("fine mode") {
    opts.mode = PipelineMode::Fine;
    const auto mrc = pinned(Task::Mrc, 0.0);
    CHECK_THROWS_AS(run_pipeline(docs, std::span(&negative, 1), {}, nullptr, opts), ConfigError);
    auto tagged = docs;
    tagged[0].tag = "fraud";
    const auto r = run_pipeline(tagged, std::span(&negative, 1), {}, &mrc, opts);
    CHECK(r.documents[0].span_text.has_value());
    CHECK(r.documents[1].error.has_value());
  }
  SUBCASE("configuration errors") {
    CHECK_THROWS_AS(run_pipeline(docs, {}, std::span(&all_keys, 1), nullptr, opts), ConfigError);
    CHECK_THROWS_AS(run_pipeline(docs, std::span(&negative, 1), {}, nullptr, opts), ConfigError);
    CHECK_THROWS_AS(run_pipeline(docs, std::span(&all_keys, 1), std::span(&all_keys, 1), nullptr, opts),
                    ConfigError);
    opts.match_threshold = 2.0;
    CHECK_THROWS_AS(run_pipeline(docs, std::span(&negative, 1), std::span(&all_keys, 1), nullptr, opts),
                    ConfigError);
  }
}
