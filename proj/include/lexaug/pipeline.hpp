/*
 * Copyright 2026 The lexaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// The subcommands behind the CLI. Every output lands under the run
// directory; evaluate and augment rebuild everything from the files that
// train wrote there (config.resolved.txt, splits.txt, vocab.txt, members).
//
// Run directory layout:
//   config.resolved.txt   every config key, sorted
//   manifest.json         model kind, input hashes, member list
//   splits.txt            holdout + per-fold train/val row indices
//   vocab.txt             token or subword vocabulary
//   member_<k>.json/.bin  checkpoints (token, dictionary)
//   baseline_model.json   weights (baseline:<name>)
//   history_fold<k>.csv   per-epoch loss and validation MAE
//   eval/                 written by evaluate
//   augmented.tsv         written by augment (default path)

#include <iosfwd>
#include <memory>
#include <ostream>

#include "lexaug/baselines.hpp"
#include "lexaug/checkpoint.hpp"
#include "lexaug/config.hpp"
#include "lexaug/defs.hpp"
#include "lexaug/embed.hpp"
#include "lexaug/eval.hpp"
#include "lexaug/predict.hpp"
#include "lexaug/train.hpp"
#include "lexaug/transformer.hpp"

namespace lexaug {

inline constexpr int kRunSchema = 1;

namespace run_files {
inline std::filesystem::path config(const std::filesystem::path& d) { return d / "config.resolved.txt"; }
inline std::filesystem::path manifest(const std::filesystem::path& d) { return d / "manifest.json"; }
inline std::filesystem::path splits(const std::filesystem::path& d) { return d / "splits.txt"; }
inline std::filesystem::path vocab(const std::filesystem::path& d) { return d / "vocab.txt"; }
inline std::filesystem::path baseline(const std::filesystem::path& d) { return d / "baseline_model.json"; }
inline std::filesystem::path member(const std::filesystem::path& d, std::size_t k) {
  return d / ("member_" + std::to_string(k));
}
inline std::filesystem::path history(const std::filesystem::path& d, std::size_t k) {
  return d / ("history_fold" + std::to_string(k) + ".csv");
}
inline std::filesystem::path eval_dir(const std::filesystem::path& d) { return d / "eval"; }
}  // namespace run_files

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Token: return "token";
    case ModelKind::Dictionary: return "dictionary";
    case ModelKind::Baseline: return "baseline";
  }
  return "?";
}

// ---------------------------------------------------------------- encoders

inline std::function<TokenSequence(const std::string&)> token_encoder(TokenVocab vocab,
                                                                     NgramConfig ng) {
  auto v = std::make_shared<TokenVocab>(std::move(vocab));
  return [v, ng](const std::string& word) {
    return encode_tokens(char_ngrams(word, ng), v->index(), TokenVocab::kUnk, ng.seq_len);
  };
}

/// Words without a usable cached definition are encoded word-only.
inline std::function<TokenSequence(const std::string&)> dictionary_encoder(
    SubwordVocab vocab, std::shared_ptr<const DefinitionCache> cache, DefinitionEncoding enc) {
  auto v = std::make_shared<SubwordVocab>(std::move(vocab));
  return [v, cache, enc](const std::string& word) {
    const DefinitionRecord* r = cache ? cache->find(word) : nullptr;
    return encode_definition(word, definition_text(r, enc.max_words), *v, enc);
  };
}

inline std::shared_ptr<const DefinitionCache> open_defs_cache(const RunConfig& cfg,
                                                              std::ostream& log) {
  const auto path = cfg.defs_cache_path();
  if (!std::filesystem::exists(path)) {
    log << "note: no definition cache at " << path.string()
        << "; every word is encoded without a definition\n";
    return nullptr;
  }
  return std::make_shared<const DefinitionCache>(path);
}

// ---------------------------------------------------------------- train

struct TrainSummary {
  std::filesystem::path run_dir;
  ModelKind kind = ModelKind::Token;
  std::size_t words = 0, holdout = 0;
  std::vector<FoldResult> folds;
};

namespace detail {

inline std::vector<std::size_t> non_holdout(const Splits& s, std::size_t n) {
  std::vector<bool> held(n, false);
  for (std::size_t i : s.holdout) held[i] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!held[i]) out.push_back(i);
  }
  return out;
}

inline nlohmann::json base_manifest(const RunConfig& cfg, const Lexicon& lex, const Splits& s) {
  nlohmann::json m;
  m["schema_version"] = kRunSchema;
  m["model_kind"] = cfg.raw.get("model.kind");
  m["lexicon"] = cfg.lexicon.string();
  m["lexicon_hash"] = hex64(fnv1a(read_file(cfg.lexicon)));
  m["n_words"] = lex.size();
  m["holdout"] = s.holdout.size();
  m["folds"] = s.folds();
  return m;
}

template <class M>
void save_members(const RunConfig& cfg, Ensemble<M>& ens, const std::string& kind,
                  const nlohmann::json& dims, const std::string& vocab_hash, nlohmann::json& manifest) {
  nlohmann::json members = nlohmann::json::array();
  std::string joined;
  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    const auto& fr = ens.folds[k];
    CheckpointManifest cm;
    cm.model_kind = kind;
    cm.dims = dims;
    cm.vocab_hash = vocab_hash;
    cm.seed = derive_seed(cfg.init_seed, k);
    cm.fold = static_cast<int>(k);
    cm.best_epoch = static_cast<int>(fr.best_epoch);
    cm.best_val_mae = fr.best_val_mae;
    const auto stem = run_files::member(cfg.run_dir, k);
    save_checkpoint(stem, ens.members[k], cm);
    write_file(run_files::history(cfg.run_dir, k), history_csv(fr));
    const std::string payload_hash =
        model_hash(read_file(cfg.run_dir / (stem.filename().string() + ".bin")));
    joined += payload_hash;
    members.push_back({{"checkpoint", stem.filename().string() + ".json"},
                       {"fold", k},
                       {"best_epoch", fr.best_epoch},
                       {"best_val_mae", fr.best_val_mae},
                       {"epochs_run", fr.history.size()},
                       {"payload_hash", payload_hash}});
  }
  manifest["members"] = members;
  manifest["model_hash"] = model_hash(joined);
}

inline nlohmann::json linear_json(const LinearModel& m) {
  return {{"kind", to_string(m.kind)}, {"lambda", m.lambda}, {"alpha", m.alpha},
          {"w", m.w},                 {"b", m.b},           {"iterations", m.iterations}};
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
  LinearModel m;
  m.w = j.at("w").get<std::vector<double>>();
  m.b = j.at("b").get<double>();
  m.lambda = j.at("lambda").get<double>();
  m.alpha = j.at("alpha").get<double>();
  return m;
}

}  // namespace detail

inline TrainSummary cmd_train(const RunConfig& cfg, std::ostream& log) {
  if (cfg.lexicon.empty()) throw InputError("config paths.lexicon is required");
  const Lexicon lex = parse_lexicon(cfg.lexicon);
  std::filesystem::create_directories(cfg.run_dir);
  write_file(run_files::config(cfg.run_dir), cfg.raw.serialize());
  const Splits splits = make_splits(lex, cfg.split);
  write_file(run_files::splits(cfg.run_dir), serialize_splits(splits));
  auto manifest = detail::base_manifest(cfg, lex, splits);

  TrainSummary out;
  out.run_dir = cfg.run_dir;
  out.kind = cfg.kind;
  out.words = lex.size();
  out.holdout = splits.holdout.size();
  const auto fit_rows = detail::non_holdout(splits, lex.size());
  log << "training " << to_string(cfg.kind) << " model on " << fit_rows.size() << " words ("
      << splits.holdout.size() << " held out, " << splits.folds() << " folds)\n";

  if (cfg.kind == ModelKind::Baseline) {
    if (cfg.vectors.empty()) throw InputError("baseline models need paths.vectors");
    std::vector<std::string> words;
    std::vector<double> y;
    for (std::size_t i : fit_rows) {
      words.push_back(lex[i].word);
      y.push_back(lex[i].h_avg);
    }
    const auto f = word_features(words, cfg.vectors, cfg.token.embed_dim, cfg.ngrams);
    BaselineSpec spec = cfg.baseline;
    spec.kind = cfg.baseline_kind;
    const auto model = fit_baseline(f.X, y, spec);
    auto j = detail::linear_json(model);
    j["label"] = spec.label();
    write_file(run_files::baseline(cfg.run_dir), j.dump(2) + "\n");
    manifest["model_hash"] = model_hash(j.dump());
    write_file(run_files::manifest(cfg.run_dir), manifest.dump(2) + "\n");
    return out;
  }

  Dataset data;
  data.targets.reserve(lex.size());
  for (const auto& e : lex.entries()) data.targets.push_back(e.h_avg);

  if (cfg.kind == ModelKind::Token) {
    // The n-gram vocabulary comes from the words the models are fit on, so
    // holdout-only n-grams fall back to <unk> exactly like unseen words.
    std::vector<std::vector<std::string>> grams;
    for (std::size_t i : fit_rows) grams.push_back(char_ngrams(lex[i].word, cfg.ngrams));
    const TokenVocab vocab = build_vocab(grams);
    write_file(run_files::vocab(cfg.run_dir), vocab.serialize());
    const auto encode = token_encoder(vocab, cfg.ngrams);
    for (const auto& e : lex.entries()) data.inputs.push_back(encode(e.word));
    TokenModelConfig mc = cfg.token;
    mc.vocab_size = vocab.size();
    auto make = [&](std::size_t k) {
      const auto seed = derive_seed(cfg.init_seed, k);
      if (cfg.vectors.empty()) return TokenModel<float>(mc, seed);
      return TokenModel<float>(
          mc, load_pretrained<float>(cfg.vectors, vocab, mc.embed_dim, derive_seed(seed, "oov")),
          seed);
    };
    auto ens = train_ensemble<TokenModel<float>>(make, data, splits, cfg.train, cfg.threads);
    detail::save_members(cfg, ens, "token", to_json(mc), hex64(vocab.hash()), manifest);
    manifest["vocab_hash"] = hex64(vocab.hash());
    out.folds = ens.folds;
  } else {
    if (cfg.subword_vocab.empty()) throw InputError("dictionary models need paths.subword_vocab");
    const auto vocab = SubwordVocab::load(cfg.subword_vocab);
    write_file(run_files::vocab(cfg.run_dir), join(vocab.tokens(), "\n") + "\n");
    const auto cache = open_defs_cache(cfg, log);
    std::size_t with_defs = 0;
    for (const auto& e : lex.entries()) {
      const auto* r = cache ? cache->find(e.word) : nullptr;
      with_defs += r && r->status == DefinitionStatus::Found;
    }
    log << with_defs << " of " << lex.size() << " words have a cached definition\n";
    const auto encode = dictionary_encoder(vocab, cache, cfg.def_encoding);
    for (const auto& e : lex.entries()) data.inputs.push_back(encode(e.word));
    DictionaryModelConfig dc = cfg.dict;
    dc.encoder.vocab_size = vocab.size();
    auto make = [&](std::size_t k) { return DictionaryModel<float>(dc, derive_seed(cfg.init_seed, k)); };
    auto ens = train_ensemble<DictionaryModel<float>>(make, data, splits, cfg.train, cfg.threads);
    detail::save_members(cfg, ens, "dictionary", to_json(dc), hex64(vocab.hash()), manifest);
    manifest["vocab_hash"] = hex64(vocab.hash());
    manifest["definitions_found"] = with_defs;
    out.folds = ens.folds;
  }
  for (const auto& f : out.folds) {
    log << "fold " << f.fold << ": best validation MAE " << format_fixed(f.best_val_mae, 4)
        << " at epoch " << f.best_epoch << "\n";
  }
  write_file(run_files::manifest(cfg.run_dir), manifest.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- loading

/// A trained run: the ensemble (or linear baseline) behind one interface.
class RunModel {
 public:
  virtual ~RunModel() = default;
  virtual std::size_t members() const = 0;
  /// Pooled MC-dropout prediction, or a single member when given.
  virtual Prediction predict(const std::string& word,
                             std::optional<std::size_t> member = std::nullopt) const = 0;
  virtual AugmentResult augment(const Lexicon& lex, const std::vector<std::string>& words,
                                bool force) const = 0;
  virtual std::string label(std::optional<std::size_t> member = std::nullopt) const = 0;
};

namespace detail {

template <class M>
class EnsembleRunModel : public RunModel {
 public:
  EnsembleRunModel(std::vector<M> members, std::function<TokenSequence(const std::string&)> encode,
                   McConfig mc, std::string name)
      : members_(std::move(members)), encode_(std::move(encode)), mc_(mc), name_(std::move(name)) {
    for (std::size_t k = 0; k < members_.size(); ++k) ids_.push_back("member_" + std::to_string(k));
  }

  std::size_t members() const override { return members_.size(); }

  Prediction predict(const std::string& word, std::optional<std::size_t> member) const override {
    const auto seq = encode_(word);
    if (member) {
      return mc_predict(std::span<const M>(&members_.at(*member), 1), word, seq, mc_,
                        {ids_[*member]});
    }
    return mc_predict(std::span<const M>(members_), word, seq, mc_, ids_);
  }

  AugmentResult augment(const Lexicon& lex, const std::vector<std::string>& words,
                        bool force) const override {
    return augment_lexicon<M>(std::span<const M>(members_), lex, words, encode_, mc_, force, ids_);
  }

  std::string label(std::optional<std::size_t> member) const override {
    if (member) return name_ + " (single, fold " + std::to_string(*member) + ")";
    return name_ + " (ensemble)";
  }

 private:
  std::vector<M> members_;
  std::vector<std::string> ids_;
  std::function<TokenSequence(const std::string&)> encode_;
  McConfig mc_;
  std::string name_;
};

class LinearRunModel : public RunModel {
 public:
  LinearRunModel(LinearModel m, std::string label, std::filesystem::path vectors, std::size_t dim,
                 NgramConfig ng)
      : m_(std::move(m)), label_(std::move(label)), vectors_(std::move(vectors)), dim_(dim), ng_(ng) {}

  std::size_t members() const override { return 1; }

  Prediction predict(const std::string& word, std::optional<std::size_t>) const override {
    return predict_all({word}).front();
  }

  AugmentResult augment(const Lexicon& lex, const std::vector<std::string>& words,
                        bool force) const override {
    AugmentResult res;
    std::vector<std::string> todo;
    for (const auto& raw : words) {
      const auto w = normalize_word(raw);
      if (w.empty()) {
        res.failures.emplace_back(raw, "empty word");
      } else if (!force && lex.contains(w)) {
        res.notices.push_back("skipped '" + w + "': already human-rated");
      } else {
        todo.push_back(w);
      }
    }
    if (!todo.empty()) {
      for (auto& p : predict_all(todo)) res.rows.push_back({std::move(p), "model"});
    }
    return res;
  }

  std::string label(std::optional<std::size_t>) const override { return label_; }

  std::vector<Prediction> predict_all(const std::vector<std::string>& words) const {
    const auto f = word_features(words, vectors_, dim_, ng_);
    const auto y = m_.predict(f.X);
    std::vector<Prediction> out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      Prediction p;
      p.word = words[i];
      p.h_hat = y[i];
      p.n_samples = 1;
      p.sources = {"baseline"};
      out.push_back(std::move(p));
    }
    return out;
  }

 private:
  LinearModel m_;
  std::string label_;
  std::filesystem::path vectors_;
  std::size_t dim_;
  NgramConfig ng_;
};

template <class M, class Config>
std::vector<M> load_members(const std::filesystem::path& run_dir, const nlohmann::json& manifest) {
  std::vector<M> out;
  for (const auto& m : manifest.at("members")) {
    const auto path = run_dir / m.at("checkpoint").get<std::string>();
    const auto cm = parse_manifest(read_file(path), path.string());
    Config c;
    from_json(cm.dims, c);
    M model(c, cm.seed);
    load_checkpoint(path, model);
    out.push_back(std::move(model));
  }
  if (out.empty()) throw InputError("run directory lists no trained members");
  return out;
}

}  // namespace detail

struct LoadedRun {
  RunConfig cfg;
  Lexicon lexicon;
  Splits splits;
  nlohmann::json manifest;
  std::unique_ptr<RunModel> model;
};

inline LoadedRun load_run(const std::filesystem::path& run_dir, std::ostream& log) {
  if (!std::filesystem::exists(run_files::manifest(run_dir))) {
    throw InputError("not a trained run directory (no manifest.json): " + run_dir.string());
  }
  ConfigMap raw;
  raw.merge_file(run_files::config(run_dir));
  raw.set("paths.run_dir", run_dir.string());
  LoadedRun r{RunConfig(raw), {}, {}, {}, nullptr};
  r.manifest = nlohmann::json::parse(read_file(run_files::manifest(run_dir)));
  r.lexicon = parse_lexicon(r.cfg.lexicon);
  if (hex64(fnv1a(read_file(r.cfg.lexicon))) != r.manifest.at("lexicon_hash").get<std::string>()) {
    throw InputError("lexicon " + r.cfg.lexicon.string() + " changed since training");
  }
  r.splits = parse_splits(read_file(run_files::splits(run_dir)));
  const auto& cfg = r.cfg;
  switch (cfg.kind) {
    case ModelKind::Token: {
      auto vocab = TokenVocab::load(run_files::vocab(run_dir));
      auto members = detail::load_members<TokenModel<float>, TokenModelConfig>(run_dir, r.manifest);
      r.model = std::make_unique<detail::EnsembleRunModel<TokenModel<float>>>(
          std::move(members), token_encoder(std::move(vocab), cfg.ngrams), cfg.mc, "Token Model");
      break;
    }
    case ModelKind::Dictionary: {
      auto vocab = SubwordVocab::load(run_files::vocab(run_dir));
      auto members =
          detail::load_members<DictionaryModel<float>, DictionaryModelConfig>(run_dir, r.manifest);
      r.model = std::make_unique<detail::EnsembleRunModel<DictionaryModel<float>>>(
          std::move(members), dictionary_encoder(std::move(vocab), open_defs_cache(cfg, log), cfg.def_encoding),
          cfg.mc, "Dictionary Model");
      break;
    }
    case ModelKind::Baseline: {
      const auto j = nlohmann::json::parse(read_file(run_files::baseline(run_dir)));
      r.model = std::make_unique<detail::LinearRunModel>(
          detail::linear_from_json(j), j.at("label").get<std::string>(), cfg.vectors,
          cfg.token.embed_dim, cfg.ngrams);
      break;
    }
  }
  return r;
}

inline std::string ensemble_hash(const LoadedRun& r) {
  return r.manifest.value("model_hash", std::string("unknown"));
}

// ---------------------------------------------------------------- evaluate

struct EvaluateSummary {
  ErrorReport ensemble;
  std::vector<std::pair<std::string, double>> singles;  // label, MAE
  std::filesystem::path out_dir;
};

inline EvaluateSummary cmd_evaluate(const std::filesystem::path& run_dir,
                                    std::optional<std::size_t> top_k, std::ostream& log) {
  auto run = load_run(run_dir, log);
  if (run.splits.holdout.empty()) throw InputError("run has no holdout words to evaluate");
  const std::size_t k = top_k.value_or(run.cfg.top_k);
  std::vector<std::string> words;
  for (std::size_t i : run.splits.holdout) words.push_back(run.lexicon[i].word);

  std::vector<Prediction> preds;
  for (const auto& w : words) preds.push_back(run.model->predict(w));
  EvaluateSummary s;
  s.ensemble = build_report(run.model->label(), preds, run.lexicon, k);

  std::vector<TableRow> table;
  table.push_back({s.ensemble.model_label, "computed", s.ensemble.mae, s.ensemble.pct});
  nlohmann::json singles = nlohmann::json::array();
  if (run.cfg.kind != ModelKind::Baseline) {
    for (std::size_t m = 0; m < run.model->members(); ++m) {
      std::vector<Prediction> one;
      for (const auto& w : words) one.push_back(run.model->predict(w, m));
      const auto rep = build_report(run.model->label(m), one, run.lexicon, k);
      table.push_back({rep.model_label, "computed", rep.mae, rep.pct});
      s.singles.emplace_back(rep.model_label, rep.mae);
      singles.push_back({{"model", rep.model_label}, {"mae", rep.mae}, {"mae_percentiles", rep.pct}});
    }
  }
  table.push_back({"Human ratings (standard deviation)", "computed", s.ensemble.human.mean_sigma,
                   s.ensemble.human.sigma_percentiles});
  table.push_back({"Human ratings (variance)", "computed", s.ensemble.human.mean_variance,
                   s.ensemble.human.variance_percentiles});
  for (auto& row : published_reference_rows()) table.push_back(std::move(row));

  auto j = report_json(s.ensemble);
  j["single_members"] = singles;
  s.out_dir = run_files::eval_dir(run_dir);
  write_file(s.out_dir / "report.json", j.dump(2) + "\n");
  write_file(s.out_dir / "table.csv", table_csv(table));
  write_file(s.out_dir / "groups.csv", group_plot_csv(s.ensemble));
  write_file(s.out_dir / "top_errors.csv", top_errors_csv(s.ensemble));
  write_file(s.out_dir / "iou.csv", iou_plot_csv(s.ensemble));
  log << "evaluated " << words.size() << " holdout words: MAE "
      << format_fixed(s.ensemble.mae, 4) << "\n";
  return s;
}

// ---------------------------------------------------------------- augment

struct AugmentSummary {
  AugmentResult result;
  std::filesystem::path out;
};

inline AugmentSummary cmd_augment(const std::filesystem::path& run_dir,
                                  const std::filesystem::path& words_file,
                                  std::optional<std::filesystem::path> out, bool force,
                                  std::ostream& log) {
  std::vector<std::string> words;
  for (const auto& line : read_lines(words_file)) {
    if (!trim(line).empty()) words.emplace_back(trim(line));
  }
  auto run = load_run(run_dir, log);
  AugmentSummary s;
  s.result = run.model->augment(run.lexicon, words, force);
  s.out = out.value_or(run_dir / "augmented.tsv");
  write_file(s.out, serialize_augmented(s.result, ensemble_hash(run)));
  for (const auto& n : s.result.notices) log << "notice: " << n << "\n";
  for (const auto& [w, msg] : s.result.failures) log << "failed: " << w << ": " << msg << "\n";
  return s;
}

// ---------------------------------------------------------------- fetch-defs

struct FetchDefsSummary {
  FetchSummary fetch;
  CoverageReport coverage;
  std::filesystem::path cache;
};

/// Fixture mode (defs.fixtures set) serves recorded JSON and skips request
/// spacing; otherwise `live` is used against the configured endpoint.
inline FetchDefsSummary cmd_fetch_defs(const RunConfig& cfg, Transport* live, std::ostream& log) {
  if (cfg.lexicon.empty()) throw InputError("config paths.lexicon is required");
  const Lexicon lex = parse_lexicon(cfg.lexicon);
  std::vector<std::string> words;
  for (const auto& e : lex.entries()) words.push_back(e.word);

  std::unique_ptr<Transport> fixtures;
  FetchContext ctx;
  auto spacing = cfg.defs_spacing;
  if (!cfg.defs_fixtures.empty()) {
    if (!std::filesystem::is_directory(cfg.defs_fixtures)) {
      throw InputError("input not found: fixture directory " + cfg.defs_fixtures);
    }
    fixtures = std::make_unique<FixtureTransport>(cfg.defs_fixtures);
    ctx.transport = fixtures.get();
    spacing = std::chrono::milliseconds(0);
  } else {
    if (!live) throw InputError("no live transport available; set defs.fixtures");
    ctx.transport = live;
  }
  ctx.endpoint = cfg.defs_endpoint.empty() ? dict_endpoint_from_env() : cfg.defs_endpoint;
  ctx.retry.max_attempts = cfg.defs_max_attempts;
  RateLimiter limiter(cfg.defs_max_concurrent, spacing);
  ctx.limiter = &limiter;

  std::filesystem::create_directories(cfg.run_dir);
  FetchDefsSummary s;
  s.cache = cfg.defs_cache_path();
  DefinitionCache cache(s.cache);
  log << "fetching definitions for " << words.size() << " words (" << cache.size()
      << " cached records)\n";
  s.fetch = fetch_all(words, cache, ctx, cfg.negative_ttl_s);
  s.coverage = coverage_report(lex, cache);
  auto j = to_json(s.coverage);
  j["requested"] = s.fetch.requested;
  j["cache_hits"] = s.fetch.cache_hits;
  j["fetched"] = s.fetch.fetched;
  j["error_words"] = s.fetch.error_words;
  write_file(cfg.run_dir / "coverage.json", j.dump(2) + "\n");
  return s;
}

// ---------------------------------------------------------------- baseline

inline std::vector<BaselineResult> cmd_baseline(const RunConfig& cfg, std::ostream& log) {
  if (cfg.lexicon.empty()) throw InputError("config paths.lexicon is required");
  if (cfg.vectors.empty()) throw InputError("baselines need paths.vectors");
  const Lexicon lex = parse_lexicon(cfg.lexicon);
  std::vector<std::string> words;
  std::vector<double> y;
  for (const auto& e : lex.entries()) {
    words.push_back(e.word);
    y.push_back(e.h_avg);
  }
  const auto f = word_features(words, cfg.vectors, cfg.token.embed_dim, cfg.ngrams);
  std::size_t by_source[3] = {0, 0, 0};
  for (auto src : f.source) ++by_source[static_cast<int>(src)];
  log << "features: " << by_source[0] << " word vectors, " << by_source[1] << " n-gram means, "
      << by_source[2] << " zero rows\n";
  std::vector<BaselineResult> results;
  for (auto kind : cfg.baseline_kinds) {
    BaselineSpec spec = cfg.baseline;
    spec.kind = kind;
    results.push_back(run_baseline_trials(f.X, y, spec));
    log << spec.label() << ": mean MAE " << format_fixed(results.back().mean_mae, 4) << "\n";
  }
  std::filesystem::create_directories(cfg.run_dir);
  write_file(run_files::config(cfg.run_dir), cfg.raw.serialize());
  write_file(cfg.run_dir / "baselines.csv",
             baseline_report_csv(results, cfg.vectors.filename().string()));
  write_file(cfg.run_dir / "baseline_trials.csv", baseline_trials_csv(results));
  return results;
}

}  // namespace lexaug
