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

// Command-line front end. Progress goes to stderr, a one-line JSON summary to
// stdout, and failures to stderr as {"error", "kind", "exit_code"}.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lexaug/defs_http.hpp"
#include "lexaug/lexaug.hpp"

namespace {

using nlohmann::json;
using namespace lexaug;

constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

// Options shared by the subcommands that build a RunConfig. Precedence is
// defaults, then --config, then the named flags, then --set.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::string lexicon, vectors, subword_vocab, run_dir, model, cache;
  std::optional<std::size_t> threads, epochs;

  void add_to(CLI::App* app) {
    app->add_option("--config", config_file, "config file (key = value lines)");
    app->add_option("--set", sets, "override one key, e.g. --set train.lr=0.0005");
    app->add_option("--lexicon", lexicon, "lexicon TSV (paths.lexicon)");
    app->add_option("--vectors", vectors, "pretrained vector file (paths.vectors)");
    app->add_option("--subword-vocab", subword_vocab, "subword vocabulary (paths.subword_vocab)");
    app->add_option("--run-dir", run_dir, "run directory (paths.run_dir)");
    app->add_option("--model", model, "token, dictionary or baseline:<kind> (model.kind)");
    app->add_option("--cache", cache, "definition cache file (paths.defs_cache)");
    app->add_option("--threads", threads, "worker threads (train.threads)");
    app->add_option("--epochs", epochs, "epoch cap (train.max_epochs)");
  }

  ConfigMap build() const {
    ConfigMap c;
    if (!config_file.empty()) c.merge_file(config_file);
    auto put = [&c](const char* key, const std::string& v) {
      if (!v.empty()) c.set(key, v);
    };
    put("paths.lexicon", lexicon);
    put("paths.vectors", vectors);
    put("paths.subword_vocab", subword_vocab);
    put("paths.run_dir", run_dir);
    put("paths.defs_cache", cache);
    put("model.kind", model);
    if (threads) c.set("train.threads", std::to_string(*threads));
    if (epochs) c.set("train.max_epochs", std::to_string(*epochs));
    for (const auto& s : sets) c.set_assignment(s);
    return c;
  }
};

void emit(const json& j) { std::cout << j.dump() << std::endl; }

int fail(const std::string& message, const char* kind, int code) {
  std::cerr << json{{"error", message}, {"kind", kind}, {"exit_code", code}}.dump() << std::endl;
  return code;
}

json fold_json(const FoldResult& f) {
  return {{"fold", f.fold}, {"best_epoch", f.best_epoch}, {"best_val_mae", f.best_val_mae},
          {"epochs_run", f.history.size()}};
}

int run(int argc, char** argv) {
  CLI::App app{"lexaug: lexicon augmentation toolkit"};
  app.require_subcommand(1);

  ConfigOptions train_opts;
  auto* train = app.add_subcommand("train", "train an ensemble and write a run directory");
  train_opts.add_to(train);

  std::string aug_run, aug_words, aug_out;
  bool aug_force = false;
  auto* augment = app.add_subcommand("augment", "score new words with a trained run");
  augment->add_option("--run-dir", aug_run, "trained run directory")->required();
  augment->add_option("--words", aug_words, "file with one word per line")->required();
  augment->add_option("--out", aug_out, "output TSV (default <run-dir>/augmented.tsv)");
  augment->add_flag("--force", aug_force, "also score words the lexicon already rates");

  std::string eval_run;
  std::optional<std::size_t> eval_top_k;
  auto* evaluate = app.add_subcommand("evaluate", "score the holdout and write eval/ reports");
  evaluate->add_option("--run-dir", eval_run, "trained run directory")->required();
  evaluate->add_option("--top-k", eval_top_k, "rows in the top-error table");

  ConfigOptions fetch_opts;
  std::string fixtures, endpoint;
  std::optional<long long> ttl;
  auto* fetch = app.add_subcommand("fetch-defs", "fill the definition cache for a lexicon");
  fetch_opts.add_to(fetch);
  fetch->add_option("--fixtures", fixtures, "serve recorded responses from this directory");
  fetch->add_option("--endpoint", endpoint,
                    "dictionary endpoint (default: $" + std::string(kDictEndpointEnv) + ")");
  fetch->add_option("--ttl", ttl, "seconds before a Missing record is refetched");

  std::string score_lexicon, score_text_arg, score_file;
  auto* score = app.add_subcommand("score-text", "mean happiness of the rated words in a text");
  score->add_option("--lexicon", score_lexicon, "lexicon TSV")->required();
  auto* text_opt = score->add_option("--text", score_text_arg, "text to score");
  auto* file_opt = score->add_option("--file", score_file, "file to score");
  text_opt->excludes(file_opt);

  ConfigOptions base_opts;
  auto* baseline = app.add_subcommand("baseline", "fit the linear baselines over repeated splits");
  base_opts.add_to(baseline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    return fail(e.what(), "usage", kExitUsage);
  }

  try {
    if (*train) {
      const RunConfig cfg(train_opts.build());
      const auto s = cmd_train(cfg, std::cerr);
      json folds = json::array();
      for (const auto& f : s.folds) folds.push_back(fold_json(f));
      emit({{"command", "train"}, {"run_dir", s.run_dir.string()}, {"model", to_string(s.kind)},
            {"words", s.words}, {"holdout", s.holdout}, {"folds", folds}});
    } else if (*augment) {
      std::optional<std::filesystem::path> out;
      if (!aug_out.empty()) out = aug_out;
      const auto s = cmd_augment(aug_run, aug_words, out, aug_force, std::cerr);
      emit({{"command", "augment"}, {"out", s.out.string()}, {"rows", s.result.rows.size()},
            {"skipped", s.result.notices.size()}, {"failed", s.result.failures.size()}});
    } else if (*evaluate) {
      const auto s = cmd_evaluate(eval_run, eval_top_k, std::cerr);
      json singles = json::array();
      for (const auto& [label, mae] : s.singles) singles.push_back({{"model", label}, {"mae", mae}});
      emit({{"command", "evaluate"}, {"out_dir", s.out_dir.string()},
            {"model", s.ensemble.model_label}, {"mae", s.ensemble.mae}, {"singles", singles}});
    } else if (*fetch) {
      auto c = fetch_opts.build();
      if (!fixtures.empty()) c.set("defs.fixtures", fixtures);
      if (!endpoint.empty()) c.set("defs.endpoint", endpoint);
      if (ttl) c.set("defs.negative_ttl_s", std::to_string(*ttl));
      const RunConfig cfg(c);
      HttpTransport http;
      const auto s = cmd_fetch_defs(cfg, &http, std::cerr);
      json j = to_json(s.coverage);
      j["command"] = "fetch-defs";
      j["cache"] = s.cache.string();
      j["requested"] = s.fetch.requested;
      j["cache_hits"] = s.fetch.cache_hits;
      j["fetched"] = s.fetch.fetched;
      j["error_words"] = s.fetch.error_words;
      emit(j);
      if (!s.fetch.error_words.empty()) {
        return fail(std::to_string(s.fetch.error_words.size()) +
                        " words failed; rerun fetch-defs to retry them",
                    "fetch", kExitInternal);
      }
    } else if (*score) {
      if (score_text_arg.empty() == score_file.empty()) {
        return fail("score-text needs exactly one of --text or --file", "usage", kExitUsage);
      }
      const Lexicon lex = parse_lexicon(score_lexicon);
      const std::string text = score_file.empty() ? score_text_arg : read_file(score_file);
      const auto v = score_text(lex, text);
      emit({{"command", "score-text"}, {"score", v ? json(*v) : json(nullptr)}});
    } else if (*baseline) {
      const RunConfig cfg(base_opts.build());
      const auto results = cmd_baseline(cfg, std::cerr);
      json rows = json::array();
      for (const auto& r : results) {
        rows.push_back({{"model", r.spec.label()}, {"mean_mae", r.mean_mae}});
      }
      emit({{"command", "baseline"}, {"run_dir", cfg.run_dir.string()}, {"results", rows}});
    }
  } catch (const InputError& e) {
    return fail(e.what(), "input", kExitUsage);
  } catch (const std::exception& e) {
    return fail(e.what(), "internal", kExitInternal);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    return fail(e.what(), "internal", kExitInternal);
  }
}
