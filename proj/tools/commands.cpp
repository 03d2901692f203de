#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "finkey/errors.hpp"
#include "finkey/metrics.hpp"
#include "finkey/synthetic.hpp"

namespace finkey::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

constexpr Task kAllTasks[] = {Task::Sentiment, Task::Match, Task::Mrc};

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

void check_threshold(double t, const std::string& what) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError(what + " must lie in [0, 1]");
}

RunConfig from_json(const json& j, const fs::path& base) {
  check_keys(j, {"schema", "seed", "paths", "train", "ensemble", "crossval", "search", "pipeline", "mrc"},
             "config");
  RunConfig cfg;
  try {
    if (j.contains("schema")) {
      const auto s = parse_schema(j["schema"].get<std::string>());
      if (!s) throw ConfigError("unknown schema " + j["schema"].dump());
      cfg.schema = *s;
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"train", "dev", "corpus", "vocab", "lexicon", "checkpoints", "reports"}, "paths");
      auto opt = [&](const char* key, std::optional<fs::path>& out) {
        if (p.contains(key)) out = resolve(base, p[key].get<std::string>());
      };
      opt("train", cfg.train_path);
      opt("dev", cfg.dev_path);
      opt("corpus", cfg.corpus_path);
      opt("vocab", cfg.vocab_path);
      opt("lexicon", cfg.lexicon_path);
      if (p.contains("checkpoints")) cfg.checkpoint_dir = p["checkpoints"].get<std::string>();
      if (p.contains("reports")) cfg.report_dir = p["reports"].get<std::string>();
    }
    cfg.checkpoint_dir = resolve(base, cfg.checkpoint_dir);
    cfg.report_dir = resolve(base, cfg.report_dir);

    std::string question_template(kDefaultQuestionTemplate);
    if (j.contains("mrc")) {
      check_keys(j["mrc"], {"template"}, "mrc");
      if (j["mrc"].contains("template")) question_template = j["mrc"]["template"].get<std::string>();
    }
    build_question("", question_template);

    const json train = j.contains("train") ? j["train"] : json::object();
    check_keys(train, {"defaults", "sentiment", "match", "mrc"}, "train");
    for (Task task : kAllTasks) {
      TrainConfig tc;
      tc.question_template = question_template;
      if (train.contains("defaults")) tc = train_config_from_json(train["defaults"].dump(), tc);
      const std::string name(to_string(task));
      if (train.contains(name)) tc = train_config_from_json(train[name].dump(), tc);
      if (tc.task != task && train.contains(name) && train[name].contains("task")) {
        throw ConfigError("train." + name + " declares task " + std::string(to_string(tc.task)));
      }
      tc.task = task;
      if (j.contains("seed")) tc.seed = j["seed"].get<std::uint64_t>();
      cfg.train[task] = tc;
    }

    if (j.contains("ensemble")) {
      const auto& e = j["ensemble"];
      check_keys(e, {"seeds", "top_m"}, "ensemble");
      if (e.contains("seeds")) cfg.ensemble.seeds = e["seeds"].get<std::vector<std::uint64_t>>();
      cfg.ensemble.top_m = e.contains("top_m") ? e["top_m"].get<std::size_t>()
                                               : std::min<std::size_t>(10, cfg.ensemble.seeds.size());
      cfg.ensemble.validate();
    }
    if (j.contains("crossval")) {
      check_keys(j["crossval"], {"k"}, "crossval");
      if (j["crossval"].contains("k")) cfg.crossval_k = j["crossval"]["k"].get<std::size_t>();
    }
    if (j.contains("search")) {
      const auto& s = j["search"];
      check_keys(s, {"lr_factors", "batch_factors"}, "search");
      if (s.contains("lr_factors")) cfg.search.lr_factors = s["lr_factors"].get<std::vector<double>>();
      if (s.contains("batch_factors")) {
        cfg.search.batch_factors = s["batch_factors"].get<std::vector<double>>();
      }
    }

    cfg.pipeline.question_template = question_template;
    if (j.contains("pipeline")) {
      const auto& p = j["pipeline"];
      check_keys(p, {"mode", "threshold", "aggregation", "max_span_len", "sentiment_checkpoints",
                     "matcher_checkpoints", "mrc_checkpoint"},
                 "pipeline");
      if (p.contains("mode")) {
        const auto mode = parse_pipeline_mode(p["mode"].get<std::string>());
        if (!mode) throw ConfigError("unknown pipeline mode " + p["mode"].dump());
        cfg.pipeline.mode = *mode;
      }
      if (p.contains("threshold")) cfg.pipeline.match_threshold = p["threshold"].get<double>();
      if (p.contains("aggregation")) {
        const auto a = p["aggregation"].get<std::string>();
        if (a == "vote") cfg.pipeline.aggregation = MatchAggregation::Vote;
        else if (a == "average") cfg.pipeline.aggregation = MatchAggregation::Average;
        else throw ConfigError("unknown aggregation " + a);
      }
      if (p.contains("max_span_len")) cfg.pipeline.max_span_len = p["max_span_len"].get<std::size_t>();
      auto paths = [&](const char* key, std::vector<fs::path>& out) {
        if (!p.contains(key)) return;
        for (const auto& s : p[key].get<std::vector<std::string>>()) out.push_back(resolve(base, s));
      };
      paths("sentiment_checkpoints", cfg.sentiment_checkpoints);
      paths("matcher_checkpoints", cfg.matcher_checkpoints);
      if (p.contains("mrc_checkpoint")) {
        cfg.mrc_checkpoint = resolve(base, p["mrc_checkpoint"].get<std::string>());
      }
    }
    check_threshold(cfg.pipeline.match_threshold, "pipeline.threshold");
    if (cfg.pipeline.max_span_len < 1) throw ConfigError("pipeline.max_span_len must be >= 1");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.canonical = j.dump();
  return cfg;
}

json parse_json_text(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  return from_json(parse_json_text(json_text, "config"), base_dir);
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string report_path;
};

struct Context {
  RunConfig cfg;
  Globals globals;
  std::ostream& out;
  std::ostream& err;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json header(const Context& ctx, std::string_view command, std::uint64_t seed) {
  return {{"tool", std::string(kToolName)},
          {"version", std::string(kToolVersion)},
          {"report_format", kReportFormat},
          {"command", std::string(command)},
          {"config_hash", hex64(fnv1a64(ctx.cfg.canonical))},
          {"seed", seed}};
}

void emit(const Context& ctx, const json& report) {
  const std::string text = report.dump(2);
  ctx.out << text << "\n";
  if (!ctx.globals.report_path.empty()) {
    const fs::path path = ctx.globals.report_path;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write report " + path.string());
    f << text << "\n";
  }
}

fs::path require_path(const std::string& flag, const std::optional<fs::path>& from_config,
                      const std::string& what) {
  fs::path p;
  if (!flag.empty()) p = flag;
  else if (from_config) p = *from_config;
  else throw ConfigError("no " + what + " path given (flag or config paths section)");
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
  return p;
}

Task require_task(const std::string& name) {
  const auto task = parse_task(name);
  if (!task) throw ConfigError("unknown task \"" + name + "\" (sentiment, match, mrc)");
  return *task;
}

Schema schema_for(const Context& ctx, Task task, const std::string& flag) {
  Schema schema = task == Task::Mrc ? Schema::Dataset2 : Schema::Dataset1;
  if (!flag.empty()) {
    const auto s = parse_schema(flag);
    if (!s) throw ConfigError("unknown schema \"" + flag + "\"");
    schema = *s;
  } else if (ctx.cfg.schema) {
    schema = *ctx.cfg.schema;
  }
  if (task == Task::Mrc && schema != Schema::Dataset2) {
    throw ConfigError("the mrc task needs a dataset-2 corpus (tagged records)");
  }
  return schema;
}

std::vector<Document> load_clean(const fs::path& path, Schema schema) {
  auto result = load_corpus(path, schema);
  if (!result.errors.empty()) {
    const auto& e = result.errors.front();
    throw DataError(path.string() + " line " + std::to_string(e.line) + " (id " + e.id +
                    "): " + e.message + "; " + std::to_string(result.errors.size()) +
                    " record error(s), run validate for the full list");
  }
  return std::move(result.documents);
}

json epochs_json(const std::vector<EpochRecord>& history) {
  json a = json::array();
  for (const auto& e : history) {
    a.push_back({{"epoch", e.epoch}, {"loss", e.mean_loss}, {"dev_score", e.dev_score}});
  }
  return a;
}

json cv_json(const CrossValResult& cv) {
  return {{"fold_scores", cv.fold_scores}, {"mean", cv.mean}};
}

TrainConfig task_config(const Context& ctx, Task task) {
  TrainConfig tc = ctx.cfg.train_config(task);
  if (ctx.globals.seed) tc.seed = *ctx.globals.seed;
  return tc;
}

// --- commands ---------------------------------------------------------------

int cmd_validate(Context& ctx, const std::string& corpus_flag, const std::string& schema_flag) {
  const auto path = require_path(corpus_flag, ctx.cfg.corpus_path, "corpus");
  Schema schema = ctx.cfg.schema.value_or(Schema::Dataset1);
  if (!schema_flag.empty()) {
    const auto s = parse_schema(schema_flag);
    if (!s) throw ConfigError("unknown schema \"" + schema_flag + "\"");
    schema = *s;
  }
  const auto result = load_corpus(path, schema);
  std::size_t no_sentiment = 0, no_list = 0, no_keys = 0, empty_list = 0, no_tag = 0;
  for (const auto& d : result.documents) {
    no_sentiment += !d.sentiment;
    no_list += !d.entity_list;
    no_keys += !d.key_entities;
    empty_list += d.entity_list && d.entity_list->empty();
    no_tag += !d.tag;
  }
  json errors = json::array();
  for (const auto& e : result.errors) {
    errors.push_back({{"line", e.line}, {"id", e.id}, {"message", e.message}});
  }
  json report = header(ctx, "validate", ctx.globals.seed.value_or(0));
  report["corpus"] = path.string();
  report["schema"] = std::string(to_string(schema));
  report["records"] = result.lines;
  report["corpus_size"] = result.documents.size();
  report["error_count"] = result.errors.size();
  report["errors"] = errors;
  report["warnings"] = {{"missing_sentiment", no_sentiment},
                        {"missing_entity_list", no_list},
                        {"missing_key_entities", no_keys},
                        {"empty_entity_list", empty_list},
                        {"missing_tag", no_tag}};
  emit(ctx, report);
  for (const auto& e : result.errors) {
    ctx.err << path.string() << ":" << e.line << ": id " << e.id << ": " << e.message << "\n";
  }
  return result.errors.empty() ? kOk : kDataFailure;
}

int cmd_build_vocab(Context& ctx, const std::string& task_name, const std::string& corpus_flag,
                    const std::string& out_flag) {
  const Task task = require_task(task_name);
  const auto tc = task_config(ctx, task);
  const auto path = require_path(corpus_flag, ctx.cfg.train_path, "corpus");
  const auto docs = load_clean(path, schema_for(ctx, task, ""));
  const auto vocab = Vocab::build_from_texts(vocab_texts(docs, tc), tc.vocab_min_freq, tc.vocab_max_size);
  fs::path out = out_flag.empty() ? ctx.cfg.vocab_path.value_or("vocab.tsv") : fs::path(out_flag);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  vocab.save(out);
  json report = header(ctx, "build-vocab", tc.seed);
  report["task"] = task_name;
  report["corpus"] = path.string();
  report["vocab"] = out.string();
  report["vocab_size"] = vocab.size();
  emit(ctx, report);
  return kOk;
}

int cmd_train(Context& ctx, const std::string& task_name, const std::string& train_flag,
              const std::string& dev_flag, const std::string& out_flag) {
  const Task task = require_task(task_name);
  const auto tc = task_config(ctx, task);
  const Schema schema = schema_for(ctx, task, "");
  const auto train_docs = load_clean(require_path(train_flag, ctx.cfg.train_path, "training corpus"), schema);
  const auto dev_docs = load_clean(require_path(dev_flag, ctx.cfg.dev_path, "dev corpus"), schema);
  const auto result = train(train_docs, dev_docs, tc, [&](const EpochRecord& e) {
    ctx.err << "epoch " << e.epoch << " loss " << e.mean_loss << " dev " << e.dev_score << "\n";
  });
  const fs::path out = out_flag.empty() ? ctx.cfg.checkpoint_dir / (task_name + ".ckpt") : fs::path(out_flag);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(out, result.checkpoint);

  json report = header(ctx, "train", tc.seed);
  report["task"] = task_name;
  report["checkpoint"] = out.string();
  report["train_config"] = json::parse(train_config_to_json(result.checkpoint.train_config));
  report["epochs"] = epochs_json(result.history);
  report["best_epoch"] = result.best_epoch;
  report["dev_score"] = result.checkpoint.dev_score;
  report["vocab_size"] = result.checkpoint.model.vocab.size();
  report["counters"] = {{"train_documents", train_docs.size()},
                        {"dev_documents", dev_docs.size()},
                        {"docs_without_labels", result.warnings.docs_without_labels},
                        {"answers_dropped", result.warnings.answers_dropped}};
  emit(ctx, report);
  return kOk;
}

int cmd_crossval(Context& ctx, const std::string& task_name, const std::string& corpus_flag,
                 std::size_t k_flag) {
  const Task task = require_task(task_name);
  const auto tc = task_config(ctx, task);
  const auto docs = load_clean(require_path(corpus_flag, ctx.cfg.train_path, "corpus"),
                               schema_for(ctx, task, ""));
  const std::size_t k = k_flag ? k_flag : ctx.cfg.crossval_k;
  const auto cv = cross_validate(docs, tc, k, ctx.globals.threads);
  json report = header(ctx, "crossval", tc.seed);
  report["task"] = task_name;
  report["k"] = k;
  report["documents"] = docs.size();
  report.update(cv_json(cv));
  emit(ctx, report);
  return kOk;
}

int cmd_ensemble(Context& ctx, const std::string& task_name, const std::string& train_flag,
                 const std::string& dev_flag, const std::string& out_dir_flag) {
  const Task task = require_task(task_name);
  const auto tc = task_config(ctx, task);
  const Schema schema = schema_for(ctx, task, "");
  const auto train_docs = load_clean(require_path(train_flag, ctx.cfg.train_path, "training corpus"), schema);
  const auto dev_docs = load_clean(require_path(dev_flag, ctx.cfg.dev_path, "dev corpus"), schema);
  const auto result = ensemble_train_select(train_docs, dev_docs, tc, ctx.cfg.ensemble, ctx.globals.threads);
  const fs::path dir = out_dir_flag.empty() ? ctx.cfg.checkpoint_dir : fs::path(out_dir_flag);
  fs::create_directories(dir);

  json members = json::array();
  std::size_t next = 0;
  for (const auto& m : result.members) {
    json row = {{"seed", m.seed}, {"dev_score", m.dev_score}, {"selected", m.selected}};
    if (m.selected) {
      const auto path = dir / (task_name + "-seed" + std::to_string(m.seed) + ".ckpt");
      save_checkpoint(path, result.selected[next++]);
      row["checkpoint"] = path.string();
    }
    members.push_back(row);
  }
  json report = header(ctx, "ensemble", tc.seed);
  report["task"] = task_name;
  report["top_m"] = ctx.cfg.ensemble.top_m;
  report["members"] = members;
  emit(ctx, report);
  return kOk;
}

std::vector<Checkpoint> load_checkpoints(const std::vector<fs::path>& paths) {
  std::vector<Checkpoint> out;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("checkpoint not found: " + p.string());
    out.push_back(load_checkpoint(p));
  }
  return out;
}

int cmd_pipeline(Context& ctx, const std::string& input_flag, const std::string& output_flag,
                 const std::string& mode_flag, std::optional<double> threshold_flag) {
  PipelineOptions options = ctx.cfg.pipeline;
  options.threads = ctx.globals.threads;
  if (!mode_flag.empty()) {
    const auto mode = parse_pipeline_mode(mode_flag);
    if (!mode) throw ConfigError("unknown pipeline mode \"" + mode_flag + "\"");
    options.mode = *mode;
  }
  if (threshold_flag) {
    check_threshold(*threshold_flag, "--threshold");
    options.match_threshold = *threshold_flag;
  }
  if (output_flag.empty()) throw ConfigError("pipeline needs --output");
  const auto input = require_path(input_flag, ctx.cfg.corpus_path, "input corpus");

  const auto sentiment = load_checkpoints(ctx.cfg.sentiment_checkpoints);
  std::vector<Checkpoint> matchers;
  std::optional<Checkpoint> mrc;
  if (options.mode == PipelineMode::Coarse) {
    matchers = load_checkpoints(ctx.cfg.matcher_checkpoints);
  } else if (ctx.cfg.mrc_checkpoint) {
    mrc = load_checkpoints({*ctx.cfg.mrc_checkpoint}).front();
  }
  std::optional<Lexicon> lexicon;
  if (ctx.cfg.lexicon_path) {
    if (!fs::exists(*ctx.cfg.lexicon_path)) {
      throw ConfigError("lexicon not found: " + ctx.cfg.lexicon_path->string());
    }
    lexicon = Lexicon::load(*ctx.cfg.lexicon_path);
    options.lexicon = &*lexicon;
  }

  const auto docs = load_clean(input, Schema::Dataset1);
  const auto result = run_pipeline(docs, sentiment, matchers, mrc ? &*mrc : nullptr, options);

  const fs::path out = output_flag;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream f(out, std::ios::binary);
  if (!f) throw DataError("cannot write " + out.string());
  for (const auto& d : result.documents) {
    json line = {{"id", d.id},
                 {"sentiment", std::string(to_string(d.sentiment.label))},
                 {"prob_negative", d.sentiment.prob_negative}};
    if (d.key_entities) line["key_entities"] = *d.key_entities;
    if (d.span_text) line["span"] = *d.span_text;
    if (d.error) line["error"] = *d.error;
    if (d.warning) line["warning"] = true;
    f << line.dump() << "\n";
  }
  if (!f) throw DataError("failed writing " + out.string());

  json report = header(ctx, "pipeline", ctx.globals.seed.value_or(0));
  report["mode"] = std::string(to_string(options.mode));
  report["threshold"] = options.match_threshold;
  report["input"] = input.string();
  report["output"] = out.string();
  report["counters"] = {{"processed", result.processed},
                        {"filtered_positive", result.filtered_positive},
                        {"warnings", result.warnings},
                        {"errors", result.errors}};
  emit(ctx, report);
  return kOk;
}

struct PredictionRecord {
  std::optional<SentimentLabel> sentiment;
  std::optional<std::vector<std::string>> key_entities;
  std::optional<std::string> span;
};

std::vector<std::pair<std::string, PredictionRecord>> load_predictions(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::pair<std::string, PredictionRecord>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PredictionRecord rec;
      if (j.contains("sentiment")) {
        rec.sentiment = parse_sentiment(j["sentiment"].get<std::string>());
        if (!rec.sentiment) throw DataError("bad sentiment");
      }
      if (j.contains("key_entities")) rec.key_entities = j["key_entities"].get<std::vector<std::string>>();
      if (j.contains("span")) rec.span = j["span"].get<std::string>();
      out.emplace_back(j.at("id").get<std::string>(), std::move(rec));
    } catch (const std::exception& e) {
      throw DataError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

int cmd_evaluate(Context& ctx, const std::string& task_name, const std::string& pred_flag,
                 const std::string& gold_flag) {
  const Task task = require_task(task_name);
  const auto pred_path = require_path(pred_flag, std::nullopt, "predictions");
  const auto gold_path = require_path(gold_flag, ctx.cfg.dev_path, "gold corpus");
  const auto gold = load_clean(gold_path, schema_for(ctx, task, ""));
  const auto preds = load_predictions(pred_path);

  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& [id, rec] : preds) {
    if (!by_id.emplace(id, &rec).second) throw DataError("duplicate prediction id " + id);
  }
  std::set<std::string> gold_ids;
  for (const auto& d : gold) gold_ids.insert(d.id);
  for (const auto& [id, rec] : preds) {
    if (!gold_ids.count(id)) throw DataError("prediction id " + id + " not in gold corpus");
  }

  std::vector<SentimentLabel> pred_labels, gold_labels;
  std::vector<EntitySet> pred_sets, gold_sets;
  std::vector<std::string> pred_spans, gold_spans;
  for (const auto& d : gold) {
    const auto it = by_id.find(d.id);
    if (it == by_id.end()) throw DataError("no prediction for id " + d.id);
    const auto& p = *it->second;
    if (d.sentiment && p.sentiment) {
      pred_labels.push_back(*p.sentiment);
      gold_labels.push_back(*d.sentiment);
    }
    EntitySet g;
    if (d.key_entities) g.insert(d.key_entities->begin(), d.key_entities->end());
    EntitySet s;
    if (task == Task::Mrc) {
      if (p.span && !p.span->empty()) s.insert(*p.span);
      if (d.key_entities && d.key_entities->size() == 1) {
        pred_spans.push_back(p.span.value_or(""));
        gold_spans.push_back(d.key_entities->front());
      }
    } else if (p.key_entities) {
      s.insert(p.key_entities->begin(), p.key_entities->end());
    }
    pred_sets.push_back(std::move(s));
    gold_sets.push_back(std::move(g));
  }

  json report = header(ctx, "evaluate", ctx.globals.seed.value_or(0));
  report["task"] = task_name;
  report["documents"] = gold.size();
  if (task == Task::Sentiment) {
    if (gold_labels.empty()) throw DataError("no documents with both gold and predicted sentiment");
    report["accuracy"] = accuracy(pred_labels, gold_labels);
  } else {
    if (!gold_labels.empty()) report["accuracy"] = accuracy(pred_labels, gold_labels);
    const auto m = entity_prf(pred_sets, gold_sets);
    report["entity"] = {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn},
                        {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    if (task == Task::Mrc && !gold_spans.empty()) report["exact_match"] = exact_match(pred_spans, gold_spans);
  }
  emit(ctx, report);
  return kOk;
}

int cmd_search(Context& ctx, const std::string& task_name, const std::string& corpus_flag,
               std::size_t k_flag) {
  const Task task = require_task(task_name);
  const auto tc = task_config(ctx, task);
  const auto docs = load_clean(require_path(corpus_flag, ctx.cfg.train_path, "corpus"),
                               schema_for(ctx, task, ""));
  const std::size_t k = k_flag ? k_flag : ctx.cfg.crossval_k;
  const auto result = neighborhood_search(tc, ctx.cfg.search, docs, k, ctx.globals.threads);
  json table = json::array();
  for (const auto& row : result.table) {
    json r = {{"learning_rate", row.learning_rate}, {"batch_size", row.batch_size}, {"changed", row.changed}};
    r.update(cv_json(row.scores));
    table.push_back(r);
  }
  json report = header(ctx, "search", tc.seed);
  report["task"] = task_name;
  report["k"] = k;
  report["table"] = table;
  report["best_row"] = result.best_row;
  report["best"] = {{"learning_rate", result.best.learning_rate}, {"batch_size", result.best.batch_size}};
  emit(ctx, report);
  return kOk;
}

int cmd_synth(Context& ctx, const std::string& kind, std::size_t documents, const std::string& out_flag,
              const std::string& lexicon_out) {
  synthetic::Options options;
  options.documents = documents;
  options.seed = ctx.globals.seed.value_or(1);
  std::vector<Document> docs;
  if (kind == "dataset-1") docs = synthetic::sentiment_entity_corpus(options);
  else if (kind == "dataset-2") docs = synthetic::tagged_corpus(options);
  else throw ConfigError("unknown synthetic kind \"" + kind + "\" (dataset-1, dataset-2)");
  const fs::path out = out_flag;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_corpus(out, docs);
  if (!lexicon_out.empty()) {
    std::ofstream f(lexicon_out, std::ios::binary);
    if (!f) throw DataError("cannot write " + lexicon_out);
    const auto lexicon = synthetic::company_lexicon();
    for (const auto& e : lexicon.entries()) f << e << "\n";
  }
  json report = header(ctx, "synth", options.seed);
  report["kind"] = kind;
  report["documents"] = docs.size();
  report["output"] = out.string();
  emit(ctx, report);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Financial key-entity mining: sentiment, entity matching and span extraction"};
  app.name(std::string(kToolName));
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(kToolVersion));

  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "override every seed in the config");
  app.add_option("--threads", g.threads, "worker threads for folds, seeds and documents")
      ->check(CLI::PositiveNumber);
  app.add_option("--report", g.report_path, "also write the JSON report to this file");

  std::string task, corpus, schema, train_path, dev_path, out_path, input, mode, preds, gold, kind, lexicon_out;
  std::size_t k = 0, documents = 1000;
  std::optional<double> threshold;

  auto* validate = app.add_subcommand("validate", "check a corpus file and list record errors");
  validate->add_option("--corpus", corpus);
  validate->add_option("--schema", schema, "dataset-1 or dataset-2");

  auto* build_vocab = app.add_subcommand("build-vocab", "build a vocabulary from a corpus");
  build_vocab->add_option("--task", task)->default_val("sentiment");
  build_vocab->add_option("--corpus", corpus);
  build_vocab->add_option("--out", out_path);

  auto* train_cmd = app.add_subcommand("train", "train one model and write a checkpoint");
  train_cmd->add_option("--task", task)->required();
  train_cmd->add_option("--train", train_path);
  train_cmd->add_option("--dev", dev_path);
  train_cmd->add_option("--out", out_path);

  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation");
  crossval->add_option("--task", task)->required();
  crossval->add_option("--corpus", corpus);
  crossval->add_option("--k", k);

  auto* ensemble = app.add_subcommand("ensemble", "train one model per seed and keep the best");
  ensemble->add_option("--task", task)->required();
  ensemble->add_option("--train", train_path);
  ensemble->add_option("--dev", dev_path);
  ensemble->add_option("--out-dir", out_path);

  auto* pipeline = app.add_subcommand("pipeline", "run sentiment filtering and key-entity detection");
  pipeline->add_option("--input", input);
  pipeline->add_option("--output", out_path)->required();
  pipeline->add_option("--mode", mode, "coarse or fine");
  pipeline->add_option("--threshold", threshold);

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against a gold corpus");
  evaluate->add_option("--task", task)->required();
  evaluate->add_option("--predictions", preds)->required();
  evaluate->add_option("--gold", gold);

  auto* search = app.add_subcommand("search", "cross-validate a grid around the configured lr and batch size");
  search->add_option("--task", task)->required();
  search->add_option("--corpus", corpus);
  search->add_option("--k", k);

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--kind", kind)->required();
  synth->add_option("--documents", documents);
  synth->add_option("--out", out_path)->required();
  synth->add_option("--lexicon-out", lexicon_out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    RunConfig cfg;
    if (!g.config_path.empty()) {
      json j = parse_json_text(read_file(g.config_path), "config");
      if (g.seed) j["seed"] = *g.seed;
      cfg = from_json(j, fs::path(g.config_path).parent_path());
    } else {
      json j = json::object();
      if (g.seed) j["seed"] = *g.seed;
      cfg = from_json(j, {});
    }
    Context ctx{std::move(cfg), g, out, err};

    if (*validate) return cmd_validate(ctx, corpus, schema);
    if (*build_vocab) return cmd_build_vocab(ctx, task, corpus, out_path);
    if (*train_cmd) return cmd_train(ctx, task, train_path, dev_path, out_path);
    if (*crossval) return cmd_crossval(ctx, task, corpus, k);
    if (*ensemble) return cmd_ensemble(ctx, task, train_path, dev_path, out_path);
    if (*pipeline) return cmd_pipeline(ctx, input, out_path, mode, threshold);
    if (*evaluate) return cmd_evaluate(ctx, task, preds, gold);
    if (*search) return cmd_search(ctx, task, corpus, k);
    if (*synth) return cmd_synth(ctx, kind, documents, out_path, lexicon_out);
    return kConfigFailure;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataFailure;
  }
}

}  // namespace finkey::cli
