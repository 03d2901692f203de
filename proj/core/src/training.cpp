#include "finkey/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "finkey/errors.hpp"
#include "finkey/metrics.hpp"
#include "finkey/parallel.hpp"

namespace finkey {

using nlohmann::json;

std::string_view to_string(LossKind kind) {
  return kind == LossKind::Focal ? "focal" : "cross_entropy";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite value >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be > 0");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
  if (max_len < 4) throw ConfigError("max_len must be >= 4");
  if (max_span_len < 1) throw ConfigError("max_span_len must be >= 1");
  if (vocab_min_freq < 1) throw ConfigError("vocab_min_freq must be >= 1");
  if (vocab_max_size < Vocab::kReserved) throw ConfigError("vocab_max_size must be >= 4");
  if (loss == LossKind::Focal && task != Task::Match) {
    throw ConfigError("focal loss applies to the match task only");
  }
  focal.validate();
  if (task == Task::Mrc) build_question("", question_template);
  EncoderConfig probe = encoder;
  probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 1);
  probe.max_len = max_len;
  probe.validate();
}

// --- JSON ------------------------------------------------------------------

namespace {

json encoder_to_json(const EncoderConfig& e) {
  return {{"vocab_size", e.vocab_size}, {"d_model", e.d_model},   {"n_heads", e.n_heads},
          {"n_layers", e.n_layers},     {"d_ff", e.d_ff},         {"max_len", e.max_len},
          {"dropout_rate", e.dropout_rate}};
}

template <typename V>
void read_key(const json& j, const char* key, V& value) {
  if (j.contains(key) && !j[key].is_null()) value = j[key].get<V>();
}

EncoderConfig encoder_from_json(const json& j, EncoderConfig e) {
  read_key(j, "vocab_size", e.vocab_size);
  read_key(j, "d_model", e.d_model);
  read_key(j, "n_heads", e.n_heads);
  read_key(j, "n_layers", e.n_layers);
  read_key(j, "d_ff", e.d_ff);
  read_key(j, "max_len", e.max_len);
  read_key(j, "dropout_rate", e.dropout_rate);
  return e;
}

json train_to_json(const TrainConfig& c) {
  json j = {{"task", std::string(to_string(c.task))},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"clip_norm", c.clip_norm},
            {"seed", c.seed},
            {"max_len", c.max_len},
            {"loss", std::string(to_string(c.loss))},
            {"focal_gamma", c.focal.gamma},
            {"threshold", c.threshold},
            {"max_span_len", c.max_span_len},
            {"question_template", c.question_template},
            {"vocab_min_freq", c.vocab_min_freq},
            {"vocab_max_size", c.vocab_max_size},
            {"encoder", encoder_to_json(c.encoder)}};
  j["focal_alpha"] = c.focal.alpha ? json(*c.focal.alpha) : json(nullptr);
  return j;
}

TrainConfig train_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  try {
    if (j.contains("task")) {
      const auto task = parse_task(j["task"].get<std::string>());
      if (!task) throw ConfigError("unknown task " + j["task"].dump());
      c.task = *task;
    }
    read_key(j, "epochs", c.epochs);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "beta1", c.beta1);
    read_key(j, "beta2", c.beta2);
    read_key(j, "adam_epsilon", c.adam_epsilon);
    read_key(j, "clip_norm", c.clip_norm);
    read_key(j, "seed", c.seed);
    read_key(j, "max_len", c.max_len);
    if (j.contains("loss")) {
      const auto name = j["loss"].get<std::string>();
      if (name == "focal") c.loss = LossKind::Focal;
      else if (name == "cross_entropy") c.loss = LossKind::CrossEntropy;
      else throw ConfigError("unknown loss " + name);
    }
    read_key(j, "focal_gamma", c.focal.gamma);
    if (j.contains("focal_alpha")) {
      if (j["focal_alpha"].is_null()) c.focal.alpha.reset();
      else c.focal.alpha = j["focal_alpha"].get<double>();
    }
    read_key(j, "threshold", c.threshold);
    read_key(j, "max_span_len", c.max_span_len);
    read_key(j, "question_template", c.question_template);
    read_key(j, "vocab_min_freq", c.vocab_min_freq);
    read_key(j, "vocab_max_size", c.vocab_max_size);
    if (j.contains("encoder")) c.encoder = encoder_from_json(j["encoder"], c.encoder);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) { return train_to_json(cfg).dump(); }

TrainConfig train_config_from_json(std::string_view json_text, const TrainConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return train_from_json(j, base);
}

// --- checkpoint I/O ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'F', 'K', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename U>
void put(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw DataError("checkpoint truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_float(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put(out, bits);
}

float get_float(std::istream& in) {
  const auto bits = get<std::uint32_t>(in);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

template <typename Fn>
void for_each_tensor(Checkpoint& ckpt, Fn&& fn) {
  ckpt.model.encoder.for_each(fn);
  ckpt.model.head.for_each(fn);
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  json header = {{"task", std::string(to_string(ckpt.model.head.task))},
                 {"encoder", encoder_to_json(ckpt.model.config)},
                 {"train", train_to_json(ckpt.train_config)},
                 {"dev_score", ckpt.dev_score},
                 {"seed", ckpt.seed},
                 {"vocab", ckpt.model.vocab.tokens()}};
  const std::string text = header.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  std::vector<std::pair<std::string, const Matrix<float>*>> tensors;
  ckpt.model.encoder.for_each(
      [&](const std::string& name, const Matrix<float>& m) { tensors.emplace_back(name, &m); });
  ckpt.model.head.for_each(
      [&](const std::string& name, const Matrix<float>& m) { tensors.emplace_back(name, &m); });
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
    for (Eigen::Index i = 0; i < m->size(); ++i) put_float(out, m->data()[i]);
  }
  if (!out) throw DataError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw DataError("checkpoint truncated");
  }
  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    const auto task = parse_task(header.at("task").get<std::string>());
    if (!task) throw DataError("checkpoint has unknown task");
    ckpt.model.config = encoder_from_json(header.at("encoder"), {});
    ckpt.train_config = train_from_json(header.at("train"), {});
    ckpt.dev_score = header.at("dev_score").get<double>();
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.model.vocab = Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    ckpt.model.config.validate();
    ckpt.model.encoder = EncoderParams<float>::zeros(ckpt.model.config);
    const auto k = static_cast<Eigen::Index>(head_outputs(*task));
    ckpt.model.head = {*task,
                       Matrix<float>::Zero(static_cast<Eigen::Index>(ckpt.model.config.d_model), k),
                       Matrix<float>::Zero(1, k)};
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }

  const auto count = get<std::uint32_t>(in);
  std::size_t expected = 0;
  for_each_tensor(ckpt, [&](const std::string&, Matrix<float>&) { ++expected; });
  if (count != expected) throw DataError("checkpoint tensor count mismatch");
  for_each_tensor(ckpt, [&](const std::string& name, Matrix<float>& m) {
    const auto len = get<std::uint32_t>(in);
    std::string stored(len, '\0');
    if (!in.read(stored.data(), len)) throw DataError("checkpoint truncated");
    if (stored != name) throw DataError("checkpoint tensor " + stored + " where " + name + " expected");
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    if (rows != m.rows() || cols != m.cols()) throw DataError("checkpoint tensor " + name + " has wrong shape");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_float(in);
  });
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

// --- examples and dev scoring -------------------------------------------------

std::vector<std::string> vocab_texts(std::span<const Document> docs, const TrainConfig& cfg) {
  std::vector<std::string> texts;
  for (const auto& doc : docs) {
    texts.push_back(doc.cleaned_text);
    if (cfg.task == Task::Match && doc.entity_list) {
      for (const auto& e : *doc.entity_list) texts.push_back(e);
    }
    if (cfg.task == Task::Mrc && doc.tag) texts.push_back(build_question(*doc.tag, cfg.question_template));
  }
  return texts;
}

std::vector<PreparedExample> prepare_examples(std::span<const Document> docs, const TrainConfig& cfg,
                                              const Vocab& vocab, DataWarnings& warnings) {
  std::vector<PreparedExample> out;
  switch (cfg.task) {
    case Task::Sentiment:
      for (const auto& doc : docs) {
        if (!doc.sentiment) {
          ++warnings.docs_without_labels;
          continue;
        }
        out.push_back({encode_single(doc.cleaned_text, vocab, cfg.max_len),
                       static_cast<int>(*doc.sentiment), 0, 0});
      }
      break;
    case Task::Match: {
      std::vector<Document> labeled;
      for (const auto& doc : docs) {
        if (doc.entity_list && doc.key_entities) labeled.push_back(doc);
        else ++warnings.docs_without_labels;
      }
      for (const auto& ex : build_pair_dataset(labeled).examples) {
        out.push_back({encode_pair(ex.entity, ex.text, vocab, cfg.max_len), *ex.label, 0, 0});
      }
      break;
    }
    case Task::Mrc: {
      std::vector<Document> labeled;
      for (const auto& doc : docs) {
        if (doc.tag && doc.key_entities) labeled.push_back(doc);
        else ++warnings.docs_without_labels;
      }
      auto dataset = build_mrc_dataset(labeled, cfg.question_template);
      warnings.answers_dropped += dataset.dropped;
      for (const auto& ex : dataset.examples) {
        auto seq = encode_pair(ex.question, ex.context, vocab, cfg.max_len);
        const auto span = char_span_to_tokens(seq, *ex.answer);
        if (!span) {
          ++warnings.answers_dropped;
          continue;
        }
        out.push_back({std::move(seq), 0, span->first, span->second});
      }
      break;
    }
  }
  return out;
}

double dev_score(const TaskModel& model, std::span<const Document> dev, const TrainConfig& cfg) {
  switch (cfg.task) {
    case Task::Sentiment: {
      std::vector<SentimentLabel> preds, golds;
      for (const auto& doc : dev) {
        if (!doc.sentiment) continue;
        preds.push_back(predict_sentiment(model, doc.cleaned_text).label);
        golds.push_back(*doc.sentiment);
      }
      if (golds.empty()) throw DataError("dev set has no labeled sentiment documents");
      return accuracy(preds, golds);
    }
    case Task::Match: {
      std::vector<EntitySet> preds, golds;
      for (const auto& doc : dev) {
        if (!doc.entity_list || !doc.key_entities) continue;
        const auto scored = score_entities(model, *doc.entity_list, doc.cleaned_text, cfg.threshold);
        const auto keys = detect_key_entities(scored, cfg.threshold);
        preds.emplace_back(keys.begin(), keys.end());
        golds.emplace_back(doc.key_entities->begin(), doc.key_entities->end());
      }
      if (golds.empty()) throw DataError("dev set has no documents with entity lists and keys");
      return entity_prf(preds, golds).f1;
    }
    case Task::Mrc: {
      std::vector<Document> labeled;
      for (const auto& doc : dev)
        if (doc.tag && doc.key_entities) labeled.push_back(doc);
      const auto dataset = build_mrc_dataset(labeled, cfg.question_template);
      std::vector<std::string> preds, golds;
      for (const auto& ex : dataset.examples) {
        const std::string gold = ex.context.substr(ex.answer->begin, ex.answer->size());
        std::string pred;
        try {
          pred = extract_span(model, ex.question, ex.context, cfg.max_span_len).text;
        } catch (const ConfigError&) {
          // context truncated away: counts as a miss
        }
        preds.push_back(std::move(pred));
        golds.push_back(gold);
      }
      if (golds.empty()) throw DataError("dev set has no answerable tagged documents");
      return exact_match(preds, golds);
    }
  }
  return 0.0;
}

// --- optimisation -------------------------------------------------------------

namespace {

std::vector<Matrix<float>*> tensors_of(EncoderParams<float>& enc, Head<float>& head) {
  std::vector<Matrix<float>*> out;
  enc.for_each([&](const std::string&, Matrix<float>& m) { out.push_back(&m); });
  head.for_each([&](const std::string&, Matrix<float>& m) { out.push_back(&m); });
  return out;
}

struct Adam {
  std::vector<Matrix<float>> m, v;
  std::size_t step = 0;

  explicit Adam(const std::vector<Matrix<float>*>& params) {
    for (auto* p : params) {
      m.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
      v.push_back(Matrix<float>::Zero(p->rows(), p->cols()));
    }
  }

  void apply(const std::vector<Matrix<float>*>& params, const std::vector<Matrix<float>*>& grads,
             const TrainConfig& cfg) {
    ++step;
    const double t = static_cast<double>(step);
    const float lr = static_cast<float>(cfg.learning_rate);
    const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
    const float c1 = static_cast<float>(1.0 - std::pow(cfg.beta1, t));
    const float c2 = static_cast<float>(1.0 - std::pow(cfg.beta2, t));
    const float eps = static_cast<float>(cfg.adam_epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = grads[i]->array();
      m[i].array() = b1 * m[i].array() + (1.0f - b1) * g;
      v[i].array() = b2 * v[i].array() + (1.0f - b2) * g.square();
      params[i]->array() -= lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
    }
  }
};

double global_norm(const std::vector<Matrix<float>*>& grads) {
  double sum = 0.0;
  for (auto* g : grads) sum += static_cast<double>(g->cast<double>().squaredNorm());
  return std::sqrt(sum);
}

// Loss and d(loss)/d(head output) for one example.
double example_loss(const TrainConfig& cfg, const PreparedExample& ex, const Matrix<float>& out,
                    Matrix<float>& d_out) {
  d_out = Matrix<float>::Zero(out.rows(), out.cols());
  switch (cfg.task) {
    case Task::Sentiment: {
      const double logits[2] = {out(0, 0), out(0, 1)};
      const auto ce = cross_entropy(logits, static_cast<std::size_t>(ex.label));
      d_out(0, 0) = static_cast<float>(ce.grad[0]);
      d_out(0, 1) = static_cast<float>(ce.grad[1]);
      return ce.loss;
    }
    case Task::Match: {
      const double z = out(0, 0);
      const auto l = cfg.loss == LossKind::Focal ? focal_loss_logit(z, ex.label, cfg.focal)
                                                 : binary_cross_entropy_logit(z, ex.label);
      d_out(0, 0) = static_cast<float>(l.d_logit);
      return l.loss;
    }
    case Task::Mrc: {
      const auto n = static_cast<std::size_t>(out.rows());
      std::vector<double> start(n), end(n);
      for (std::size_t i = 0; i < n; ++i) {
        start[i] = out(static_cast<Eigen::Index>(i), 0);
        end[i] = out(static_cast<Eigen::Index>(i), 1);
      }
      const auto valid = context_positions(ex.seq);
      const auto l = span_loss(start, end, valid, ex.gold_start, ex.gold_end);
      for (std::size_t i = 0; i < n; ++i) {
        d_out(static_cast<Eigen::Index>(i), 0) = static_cast<float>(l.d_start[i]);
        d_out(static_cast<Eigen::Index>(i), 1) = static_cast<float>(l.d_end[i]);
      }
      return l.loss;
    }
  }
  return 0.0;
}

}  // namespace

TrainResult train(std::span<const Document> train_docs, std::span<const Document> dev_docs,
                  const TrainConfig& cfg_in, const EpochCallback& on_epoch) {
  cfg_in.validate();
  if (train_docs.empty()) throw DataError("training set is empty");
  if (dev_docs.empty()) throw DataError("dev set is empty");

  TrainResult result;
  TrainConfig cfg = cfg_in;
  const auto texts = vocab_texts(train_docs, cfg);
  Vocab vocab = Vocab::build_from_texts(texts, cfg.vocab_min_freq, cfg.vocab_max_size);
  cfg.encoder.vocab_size = vocab.size();
  cfg.encoder.max_len = cfg.max_len;
  cfg.encoder.validate();

  const auto examples = prepare_examples(train_docs, cfg, vocab, result.warnings);
  if (examples.empty()) throw DataError("no usable training examples for task " +
                                        std::string(to_string(cfg.task)));

  Rng rng(cfg.seed);
  TaskModel model{cfg.encoder, init_params<float>(cfg.encoder, rng),
                  init_head<float>(cfg.task, cfg.encoder.d_model, rng), vocab};
  auto enc_grads = EncoderParams<float>::zeros(cfg.encoder);
  auto head_grads = model.head.zeros_like();
  const auto params = tensors_of(model.encoder, model.head);
  const auto grads = tensors_of(enc_grads, head_grads);
  Adam adam(params);

  EncoderParams<float> best_encoder = model.encoder;
  Head<float> best_head = model.head;
  double best_score = -1.0;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  ForwardCache<float> cache;
  Matrix<float> d_out;
  std::size_t batch_index = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto* g : grads) g->setZero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const auto& ex = examples[order[b]];
        const auto pooled = forward_real(model.encoder, model.config, ex.seq, true, &rng, &cache);
        const Matrix<float> out = head_forward(model.head, pooled);
        batch_loss += example_loss(cfg, ex, out, d_out);
        const auto [d_sentence, d_tokens] = head_backward(model.head, pooled, d_out, head_grads);
        accumulate_backward(model.encoder, model.config, cache, d_sentence, d_tokens, enc_grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + " at batch " +
                             std::to_string(batch_index));
      }
      loss_sum += batch_loss;
      const float inv = 1.0f / static_cast<float>(stop - start);
      for (auto* g : grads) *g *= inv;
      const double norm = global_norm(grads);
      if (!std::isfinite(norm)) {
        throw NumericalError("non-finite gradient in epoch " + std::to_string(epoch) +
                             " at batch " + std::to_string(batch_index));
      }
      if (norm > cfg.clip_norm) {
        const float s = static_cast<float>(cfg.clip_norm / norm);
        for (auto* g : grads) *g *= s;
      }
      adam.apply(params, grads, cfg);
      ++batch_index;
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(examples.size()),
                       dev_score(model, dev_docs, cfg)};
    if (record.dev_score > best_score) {
      best_score = record.dev_score;
      best_encoder = model.encoder;
      best_head = model.head;
      result.best_epoch = epoch;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
  }

  model.encoder = std::move(best_encoder);
  model.head = std::move(best_head);
  result.checkpoint = {std::move(model), cfg, best_score, cfg.seed};
  return result;
}

// --- folds, cross-validation, search ----------------------------------------

FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n) {
    throw ConfigError("kfold_split needs 2 <= k <= n (k=" + std::to_string(k) +
                      ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());
  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i) split.folds[i % k].push_back(perm[i]);
  return split;
}

CrossValResult cross_validate(std::span<const Document> docs, const TrainConfig& cfg, std::size_t k,
                              std::size_t threads) {
  cfg.validate();
  const auto split = kfold_split(docs.size(), k, cfg.seed);
  CrossValResult result;
  result.fold_scores.assign(k, 0.0);
  parallel_for(k, threads, [&](std::size_t fold) {
    std::vector<Document> train_docs, dev_docs;
    std::vector<bool> held_out(docs.size(), false);
    for (auto i : split.folds[fold]) held_out[i] = true;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      (held_out[i] ? dev_docs : train_docs).push_back(docs[i]);
    }
    result.fold_scores[fold] = train(train_docs, dev_docs, cfg).checkpoint.dev_score;
  });
  result.mean = std::accumulate(result.fold_scores.begin(), result.fold_scores.end(), 0.0) /
                static_cast<double>(k);
  return result;
}

SearchResult neighborhood_search(const TrainConfig& base, const SearchGrid& grid,
                                 std::span<const Document> docs, std::size_t k,
                                 std::size_t threads) {
  if (grid.lr_factors.empty() || grid.batch_factors.empty()) {
    throw ConfigError("neighborhood search grid is empty");
  }
  auto with_base = [](std::vector<double> factors) {
    if (std::find(factors.begin(), factors.end(), 1.0) == factors.end()) factors.push_back(1.0);
    std::sort(factors.begin(), factors.end());
    factors.erase(std::unique(factors.begin(), factors.end()), factors.end());
    return factors;
  };
  const auto lr_factors = with_base(grid.lr_factors);
  const auto batch_factors = with_base(grid.batch_factors);

  SearchResult result;
  std::vector<TrainConfig> candidates;
  for (double lf : lr_factors) {
    for (double bf : batch_factors) {
      if (!(lf > 0.0) || !(bf > 0.0)) throw ConfigError("search factors must be > 0");
      TrainConfig c = base;
      c.learning_rate = base.learning_rate * lf;
      c.batch_size = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(static_cast<double>(base.batch_size) * bf)));
      const std::size_t changed = (c.learning_rate != base.learning_rate) +
                                  (c.batch_size != base.batch_size);
      // distinct factors can round to the same batch size
      const bool duplicate = std::any_of(candidates.begin(), candidates.end(), [&](const auto& o) {
        return o.learning_rate == c.learning_rate && o.batch_size == c.batch_size;
      });
      if (duplicate) continue;
      candidates.push_back(c);
      result.table.push_back({c.learning_rate, c.batch_size, changed, {}});
    }
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    result.table[i].scores = cross_validate(docs, candidates[i], k, threads);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    const auto& a = result.table[i];
    const auto& b = result.table[best];
    if (a.scores.mean != b.scores.mean) {
      if (a.scores.mean > b.scores.mean) best = i;
      continue;
    }
    if (a.changed != b.changed) {
      if (a.changed < b.changed) best = i;
      continue;
    }
    if (std::tie(a.learning_rate, a.batch_size) < std::tie(b.learning_rate, b.batch_size)) best = i;
  }
  result.best_row = best;
  result.best = candidates[best];
  return result;
}

}  // namespace finkey
