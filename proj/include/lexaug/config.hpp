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

// Run configuration: a flat "key = value" text file layered over built-in
// defaults, with command-line overrides on top. The resolved map (every key,
// sorted) is written into each run directory and is all that evaluate and
// augment read back.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lexaug/baselines.hpp"
#include "lexaug/predict.hpp"
#include "lexaug/train.hpp"
#include "lexaug/transformer.hpp"

namespace lexaug {

inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> d{
      {"paths.lexicon", ""},
      {"paths.vectors", ""},
      {"paths.subword_vocab", ""},
      {"paths.defs_cache", ""},
      {"paths.run_dir", "run"},
      {"model.kind", "token"},
      {"split.holdout_fraction", "0.2"},
      {"split.folds", "5"},
      {"split.seed", "0"},
      {"split.stratified", "false"},
      {"train.max_epochs", "500"},
      {"train.batch_size", "32"},
      {"train.patience", "50"},
      {"train.lr", "0.001"},
      {"train.seed", "0"},
      {"train.threads", "1"},
      {"train.sparse_embeddings", "false"},
      {"token.embed_dim", "50"},
      {"token.hidden", "128,64,32"},
      {"token.dropout", "0.5"},
      {"token.ngram_min", "3"},
      {"token.ngram_max", "5"},
      {"token.seq_len", "50"},
      {"token.boundary_markers", "false"},
      {"token.freeze_embeddings", "false"},
      {"dict.layers", "2"},
      {"dict.heads", "4"},
      {"dict.model_dim", "64"},
      {"dict.ff_dim", "256"},
      {"dict.max_seq_len", "128"},
      {"dict.dropout", "0.1"},
      {"dict.positional", "true"},
      {"dict.hidden", "128,64,32"},
      {"dict.head_dropout", "0.5"},
      {"dict.max_def_words", "50"},
      {"dict.freeze_encoder", "false"},
      {"mc.samples", "100"},
      {"mc.seed", "0"},
      {"defs.endpoint", ""},
      {"defs.fixtures", ""},
      {"defs.negative_ttl_s", "2592000"},
      {"defs.max_concurrent", "2"},
      {"defs.spacing_ms", "250"},
      {"defs.max_attempts", "4"},
      {"baseline.kinds", "ols,ridge,lasso,elasticnet"},
      {"baseline.lambda", "1"},
      {"baseline.alpha", "0.5"},
      {"baseline.trials", "10"},
      {"baseline.max_iter", "1000"},
      {"baseline.tol", "0.0001"},
      {"baseline.seed", "0"},
      {"eval.top_k", "50"},
  };
  return d;
}

/// String-valued settings; keys are checked against the defaults table.
class ConfigMap {
 public:
  ConfigMap() : values_(config_defaults()) {}

  void set(const std::string& key, const std::string& value) {
    if (!config_defaults().count(key)) throw InputError("unknown config key '" + key + "'");
    values_[key] = std::string(trim(value));
  }

  /// "key=value" as given on the command line.
  void set_assignment(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("expected key=value, got '" + kv + "'");
    set(std::string(trim(kv.substr(0, eq))), kv.substr(eq + 1));
  }

  void merge_text(const std::string& text, const std::string& source) {
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
      ++lineno;
      auto line = trim(raw);
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError(lineno, source + ": expected 'key = value'");
      }
      try {
        set(std::string(trim(line.substr(0, eq))), std::string(line.substr(eq + 1)));
      } catch (const ParseError&) {
        throw;
      } catch (const InputError& e) {
        throw ParseError(lineno, source + ": " + e.what());
      }
    }
  }

  void merge_file(const std::filesystem::path& path) { merge_text(read_file(path), path.string()); }

  const std::string& get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw InputError("unknown config key '" + key + "'");
    return it->second;
  }

  std::string serialize() const {
    std::string out = "# lexaug resolved configuration\n";
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

namespace detail {

inline double config_double(const ConfigMap& c, const std::string& key) {
  double v = 0;
  if (!parse_double(c.get(key), v) || !std::isfinite(v)) {
    throw InputError("config " + key + ": expected a number, got '" + c.get(key) + "'");
  }
  return v;
}

inline long long config_int(const ConfigMap& c, const std::string& key, long long min) {
  long long v = 0;
  if (!parse_int(c.get(key), v) || v < min) {
    throw InputError("config " + key + ": expected an integer >= " + std::to_string(min) +
                     ", got '" + c.get(key) + "'");
  }
  return v;
}

inline std::size_t config_size(const ConfigMap& c, const std::string& key, long long min = 0) {
  return static_cast<std::size_t>(config_int(c, key, min));
}

inline std::uint64_t config_seed(const ConfigMap& c, const std::string& key) {
  return static_cast<std::uint64_t>(config_int(c, key, 0));
}

inline bool config_bool(const ConfigMap& c, const std::string& key) {
  const auto& v = c.get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InputError("config " + key + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::size_t> config_sizes(const ConfigMap& c, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& part : split(c.get(key), ',')) {
    long long v = 0;
    if (!parse_int(trim(part), v) || v < 1) {
      throw InputError("config " + key + ": expected comma-separated positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

inline Regularizer parse_regularizer(const std::string& name) {
  if (name == "ols") return Regularizer::None;
  if (name == "ridge") return Regularizer::Ridge;
  if (name == "lasso") return Regularizer::Lasso;
  if (name == "elasticnet") return Regularizer::ElasticNet;
  throw InputError("unknown baseline '" + name + "' (expected ols, ridge, lasso or elasticnet)");
}

}  // namespace detail

enum class ModelKind { Token, Dictionary, Baseline };

/// Typed view of a ConfigMap; construction validates every key.
struct RunConfig {
  ConfigMap raw;

  std::filesystem::path lexicon, vectors, subword_vocab, defs_cache, run_dir;
  ModelKind kind = ModelKind::Token;
  Regularizer baseline_kind = Regularizer::Ridge;  // for kind == Baseline
  SplitSpec split;
  TrainConfig train;
  std::size_t threads = 1;
  std::uint64_t init_seed = 0;
  TokenModelConfig token;
  NgramConfig ngrams;
  DictionaryModelConfig dict;
  DefinitionEncoding def_encoding;
  McConfig mc;
  std::string defs_endpoint, defs_fixtures;
  std::int64_t negative_ttl_s = 0;
  std::size_t defs_max_concurrent = 2;
  std::chrono::milliseconds defs_spacing{250};
  std::size_t defs_max_attempts = 4;
  std::vector<Regularizer> baseline_kinds;
  BaselineSpec baseline;
  std::size_t top_k = 50;

  explicit RunConfig(ConfigMap c = {}) : raw(std::move(c)) {
    using namespace detail;
    lexicon = raw.get("paths.lexicon");
    vectors = raw.get("paths.vectors");
    subword_vocab = raw.get("paths.subword_vocab");
    defs_cache = raw.get("paths.defs_cache");
    run_dir = raw.get("paths.run_dir");
    if (run_dir.empty()) throw InputError("config paths.run_dir must not be empty");

    const auto& k = raw.get("model.kind");
    if (k == "token") {
      kind = ModelKind::Token;
    } else if (k == "dictionary") {
      kind = ModelKind::Dictionary;
    } else if (k.rfind("baseline:", 0) == 0) {
      kind = ModelKind::Baseline;
      baseline_kind = parse_regularizer(k.substr(9));
    } else {
      throw InputError("config model.kind: expected token, dictionary or baseline:<name>, got '" +
                       k + "'");
    }

    split.holdout_fraction = config_double(raw, "split.holdout_fraction");
    split.folds = config_size(raw, "split.folds", 2);
    split.seed = config_seed(raw, "split.seed");
    split.stratified = config_bool(raw, "split.stratified");
    split.validate();

    train.max_epochs = config_size(raw, "train.max_epochs", 1);
    train.batch_size = config_size(raw, "train.batch_size", 1);
    train.patience = config_size(raw, "train.patience");
    train.adam.lr = config_double(raw, "train.lr");
    train.adam.sparse_embeddings = config_bool(raw, "train.sparse_embeddings");
    train.seed = config_seed(raw, "train.seed");
    train.validate();
    threads = config_size(raw, "train.threads", 1);
    init_seed = derive_seed(train.seed, "init");

    token.embed_dim = config_size(raw, "token.embed_dim", 1);
    token.hidden = config_sizes(raw, "token.hidden");
    token.dropout = config_double(raw, "token.dropout");
    token.freeze_embeddings = config_bool(raw, "token.freeze_embeddings");
    ngrams.n_min = static_cast<int>(config_int(raw, "token.ngram_min", 1));
    ngrams.n_max = static_cast<int>(config_int(raw, "token.ngram_max", 1));
    ngrams.seq_len = config_size(raw, "token.seq_len", 1);
    ngrams.boundary_markers = config_bool(raw, "token.boundary_markers");
    ngrams.validate();

    dict.encoder.layers = config_size(raw, "dict.layers", 1);
    dict.encoder.heads = config_size(raw, "dict.heads", 1);
    dict.encoder.model_dim = config_size(raw, "dict.model_dim", 1);
    dict.encoder.ff_dim = config_size(raw, "dict.ff_dim", 1);
    dict.encoder.max_seq_len = config_size(raw, "dict.max_seq_len", 4);
    dict.encoder.dropout = config_double(raw, "dict.dropout");
    dict.encoder.positional = config_bool(raw, "dict.positional");
    dict.hidden = config_sizes(raw, "dict.hidden");
    dict.head_dropout = config_double(raw, "dict.head_dropout");
    dict.freeze_encoder = config_bool(raw, "dict.freeze_encoder");
    def_encoding.max_words = config_size(raw, "dict.max_def_words", 1);
    def_encoding.seq_len = dict.encoder.max_seq_len;
    for (double r : {token.dropout, dict.encoder.dropout, dict.head_dropout}) {
      if (!(r >= 0.0 && r < 1.0)) throw InputError("dropout rates must lie in [0, 1)");
    }

    mc.samples_per_model = config_size(raw, "mc.samples", 1);
    mc.seed = config_seed(raw, "mc.seed");

    defs_endpoint = raw.get("defs.endpoint");
    defs_fixtures = raw.get("defs.fixtures");
    negative_ttl_s = config_int(raw, "defs.negative_ttl_s", -1);
    defs_max_concurrent = config_size(raw, "defs.max_concurrent", 1);
    defs_spacing = std::chrono::milliseconds(config_int(raw, "defs.spacing_ms", 0));
    defs_max_attempts = config_size(raw, "defs.max_attempts", 1);

    for (const auto& name : split_list(raw.get("baseline.kinds"))) {
      baseline_kinds.push_back(parse_regularizer(name));
    }
    baseline.lambda = config_double(raw, "baseline.lambda");
    baseline.alpha = config_double(raw, "baseline.alpha");
    baseline.trials = config_size(raw, "baseline.trials", 1);
    baseline.max_iter = config_size(raw, "baseline.max_iter", 1);
    baseline.tol = config_double(raw, "baseline.tol");
    baseline.seed = config_seed(raw, "baseline.seed");
    baseline.holdout_fraction = split.holdout_fraction;
    if (baseline.lambda < 0 || baseline.alpha < 0 || baseline.alpha > 1) {
      throw InputError("baseline lambda must be >= 0 and alpha in [0, 1]");
    }

    top_k = config_size(raw, "eval.top_k", 1);
  }

  std::filesystem::path defs_cache_path() const {
    return defs_cache.empty() ? run_dir / "defs_cache.jsonl" : defs_cache;
  }

 private:
  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& p : lexaug::split(s, ',')) {
      const auto t = trim(p);
      if (!t.empty()) out.emplace_back(t);
    }
    return out;
  }
};

}  // namespace lexaug
