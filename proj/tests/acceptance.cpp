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

// Acceptance run: one line per criterion, "ACn PASS|FAIL|SKIP <detail>".
//
//   acceptance [--only AC5,AC9] [--expect-fail AC4]
//
// Exit status is 0 when the set of failing criteria equals the
// --expect-fail set, so a known failure stays visible in the output without
// hiding new ones. AC6 needs LEXAUG_FULL_LEXICON and LEXAUG_FULL_VECTORS
// (a published 300-d subword vector text file) and is skipped otherwise.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "lexaug/lexaug.hpp"

namespace {

using namespace lexaug;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const fs::path kSource = LEXAUG_SOURCE_DIR;
const fs::path kSample = kSource / "data" / "sample";

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict verdict(bool ok, std::string detail) {
  return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)};
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("lexaug_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TokenSequence random_sequence(Rng& rng, std::size_t n, std::size_t seq_len, std::size_t vocab) {
  TokenSequence s;
  s.ids.assign(seq_len, kPadId);
  s.mask.assign(seq_len, false);
  for (std::size_t i = 0; i < n; ++i) {
    s.ids[i] = static_cast<TokenId>(2 + uniform_index(rng, vocab - 2));
    s.mask[i] = true;
  }
  return s;
}

// ------------------------------------------------------------------ AC1

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double dense_worst = 0.0;
  std::string dense_param;
  std::size_t kinks = 0, checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    TokenModelConfig cfg;
    cfg.vocab_size = 3 + uniform_index(rng, 48);
    cfg.embed_dim = 1 + uniform_index(rng, 8);
    cfg.hidden = {1 + uniform_index(rng, 16), 1 + uniform_index(rng, 8),
                  1 + uniform_index(rng, 4)};
    cfg.dropout = 0.5;
    TokenModel<double> model(cfg, 1000 + trial);
    std::vector<TokenSequence> batch;
    std::vector<double> y;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(random_sequence(rng, 1 + uniform_index(rng, 6), 8, cfg.vocab_size));
      y.push_back(uniform(rng, 1, 9));
    }
    const Mode mode = trial % 2 ? Mode::Train : Mode::Infer;
    const auto r = grad_check(model, batch, y, 1e-5, mode, trial);
    kinks += r.kink_skipped;
    checked += r.checked;
    if (r.max_rel_error > dense_worst) {
      dense_worst = r.max_rel_error;
      dense_param = r.worst_param;
    }
  }

  double enc_worst = 0.0;
  std::string enc_param;
  for (int trial = 0; trial < 20; ++trial) {
    DictionaryModelConfig cfg;
    cfg.encoder.vocab_size = 20;
    cfg.encoder.layers = 1 + trial % 2;
    cfg.encoder.heads = 2;
    cfg.encoder.model_dim = 8;
    cfg.encoder.ff_dim = 16;
    cfg.encoder.max_seq_len = 8;
    cfg.hidden = {16, 8, 4};
    DictionaryModel<double> model(cfg, 2000 + trial);
    std::vector<TokenSequence> batch;
    std::vector<double> y;
    for (int i = 0; i < 3; ++i) {
      batch.push_back(random_sequence(rng, 1 + uniform_index(rng, 6), 6, 20));
      y.push_back(uniform(rng, 1, 9));
    }
    const Mode mode = trial % 2 ? Mode::Train : Mode::Infer;
    const auto r = grad_check(model, batch, y, 1e-4, mode, trial, 1e-6, kEncoderGradCheckFloor);
    kinks += r.kink_skipped;
    checked += r.checked;
    if (r.max_rel_error > enc_worst) {
      enc_worst = r.max_rel_error;
      enc_param = r.worst_param;
    }
  }
  const double secs = seconds_since(t0);
  return verdict(dense_worst < 1e-5 && enc_worst < 1e-4 && secs < 120,
                 "dense max rel err " + fmt(dense_worst) + " (" + dense_param +
                     ") < 1e-5; encoder " + fmt(enc_worst) + " (" + enc_param + ") < 1e-4; " +
                     std::to_string(checked) + " coordinates, " + std::to_string(kinks) +
                     " ReLU-kink probes skipped; " + fmt(secs, 3) + " s < 120 s");
}

// ------------------------------------------------------------------ AC2

std::vector<std::string> brute_force_ngrams(const std::string& w) {
  std::vector<std::string> out{w};
  for (std::size_t n = 3; n <= 5; ++n) {
    for (std::size_t i = 0; i + n <= w.size(); ++i) out.push_back(w.substr(i, n));
  }
  return out;
}

double oracle_percentile(std::vector<double> v, double rank) {
  std::sort(v.begin(), v.end());
  const double h = rank / 100.0 * (static_cast<double>(v.size()) - 1.0);
  const double fl = std::floor(h);
  const auto i = static_cast<std::size_t>(fl);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (h - fl) * (v[i + 1] - v[i]);
}

double grid_iou(Interval a, Interval b, int cells = 200000) {
  const double lo = std::min(a.lo, b.lo), hi = std::max(a.hi, b.hi);
  const double step = (hi - lo) / cells;
  long both = 0, either = 0;
  for (int i = 0; i < cells; ++i) {
    const double x = lo + (i + 0.5) * step;
    const bool in_a = x >= a.lo && x <= a.hi, in_b = x >= b.lo && x <= b.hi;
    both += in_a && in_b;
    either += in_a || in_b;
  }
  return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

Verdict oracle_equivalence() {
  Rng rng(202);
  std::size_t ngram_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    std::string w(1 + uniform_index(rng, 24), ' ');
    for (auto& c : w) c = static_cast<char>('a' + uniform_index(rng, 5));
    ngram_mismatch += char_ngrams(w) != brute_force_ngrams(w);
  }

  double ridge_worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 20 + uniform_index(rng, 40), d = 1 + uniform_index(rng, 10);
    const double lambda = t % 4 == 0 ? 0.0 : uniform(rng, 0.01, 10.0);
    Matrix X(n, d);
    for (auto& v : X.v) v = uniform(rng, -2, 2);
    std::vector<double> y(n);
    for (auto& v : y) v = uniform(rng, 1, 9);
    const auto model = fit_ridge(X, y, lambda);
    const auto ni = static_cast<Eigen::Index>(n), di = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ni + di, di + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni + di);
    for (Eigen::Index i = 0; i < ni; ++i) {
      A(i, 0) = 1.0;
      for (Eigen::Index j = 0; j < di; ++j) A(i, j + 1) = X(i, j);
      rhs(i) = y[i];
    }
    for (Eigen::Index j = 0; j < di; ++j) A(ni + j, j + 1) = std::sqrt(lambda);
    const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(rhs);
    ridge_worst = std::max(ridge_worst, std::abs(sol(0) - model.b));
    for (Eigen::Index j = 0; j < di; ++j) {
      ridge_worst = std::max(ridge_worst, std::abs(sol(j + 1) - model.w[j]));
    }
  }

  std::size_t pct_mismatch = 0;
  const std::array<double, 5> ranks{25, 50, 75, 85, 95};
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + uniform_index(rng, 80));
    for (auto& x : v) x = uniform(rng, 0, 8);
    const auto got = percentiles(v, ranks);
    for (std::size_t i = 0; i < ranks.size(); ++i) pct_mismatch += got[i] != oracle_percentile(v, ranks[i]);
  }

  double iou_worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto draw = [&] {
      const double a = uniform(rng, 0, 10), b = uniform(rng, 0, 10);
      return Interval{std::min(a, b), std::max(a, b)};
    };
    const auto a = draw(), b = draw();
    iou_worst = std::max(iou_worst, std::abs(interval_iou(a, b) - grid_iou(a, b)));
  }

  return verdict(ngram_mismatch == 0 && ridge_worst < 1e-8 && pct_mismatch == 0 &&
                     iou_worst < 1e-3,
                 "n-gram mismatches " + std::to_string(ngram_mismatch) +
                     "/1000; ridge max |diff| " + fmt(ridge_worst) +
                     " < 1e-8; percentile mismatches " + std::to_string(pct_mismatch) +
                     "; IOU max |diff| " + fmt(iou_worst) + " < 1e-3");
}

// ------------------------------------------------------------------ AC3

Verdict split_integrity() {
  const std::size_t n = 1000;
  std::size_t violations = 0;
  std::string first;
  auto note = [&](bool ok, const std::string& what) {
    if (!ok && violations++ == 0) first = what;
  };
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = make_splits(n, {0.2, 5, seed, false});
    std::vector<int> held(n, 0), val_count(n, 0);
    for (auto i : s.holdout) ++held[i];
    note(s.holdout.size() == 200, "holdout size");
    for (std::size_t i = 0; i < n; ++i) note(held[i] <= 1, "duplicate holdout index");
    note(s.folds() == 5, "fold count");
    for (std::size_t f = 0; f < s.folds(); ++f) {
      std::vector<int> in_train(n, 0);
      for (auto i : s.train[f]) {
        ++in_train[i];
        note(!held[i], "holdout index in fold train");
      }
      for (auto i : s.val[f]) {
        note(!held[i], "holdout index in fold val");
        note(!in_train[i], "fold train/val overlap");
        ++val_count[i];
      }
      for (std::size_t i = 0; i < n; ++i) note(in_train[i] <= 1, "duplicate train index");
      const auto vs = static_cast<long>(s.val[f].size());
      const auto ts = static_cast<long>(s.train[f].size());
      note(std::abs(vs - 160) <= 1 && std::abs(ts - 640) <= 1, "fold sizes");
      note(s.train[f].size() + s.val[f].size() == n - s.holdout.size(), "fold covers non-holdout");
    }
    for (std::size_t i = 0; i < n; ++i) {
      note(val_count[i] == (held[i] ? 0 : 1), "validation sets do not partition non-holdout");
    }
  }
  return verdict(violations == 0, "50 seeds x 1000 words: " + std::to_string(violations) +
                                      " violations" + (first.empty() ? "" : " (first: " + first + ")") +
                                      "; sizes 200 / 640-160");
}

// ------------------------------------------------------------------ AC4

std::vector<TokenModel<float>> mc_members(double dropout) {
  TokenModelConfig cfg;
  cfg.vocab_size = 40;
  cfg.embed_dim = 8;
  cfg.hidden = {16, 8, 4};
  cfg.dropout = dropout;
  std::vector<TokenModel<float>> out;
  for (std::size_t m = 0; m < 5; ++m) {
    out.emplace_back(cfg, 400 + m);
    out.back().head().head().b[0] = 5.0f;
  }
  return out;
}

Verdict mc_dropout_semantics() {
  Rng rng(404);
  std::vector<TokenSequence> words;
  for (int i = 0; i < 100; ++i) words.push_back(random_sequence(rng, 1 + uniform_index(rng, 8), 12, 40));

  McConfig mc;
  const auto zero = mc_members(0.0);
  std::size_t ensemble_sigma_zero = 0, member_sigma_zero = 0, mean_ok = 0, n500 = 0;
  double worst_mean_gap = 0.0, largest_sigma = 0.0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto p = mc_predict(std::span<const TokenModel<float>>(zero), "w" + std::to_string(w),
                              words[w], mc);
    double sum = 0.0;
    bool all_members_zero = true;
    for (const auto& m : zero) {
      const auto one = mc_predict(std::span<const TokenModel<float>>(&m, 1), "w", words[w], mc);
      all_members_zero = all_members_zero && one.sigma_hat == 0.0;
      sum += m.predict(std::vector{words[w]})[0];
    }
    const double mean = sum / 5.0;
    const double gap = std::abs(p.h_hat - mean);
    worst_mean_gap = std::max(worst_mean_gap, gap);
    mean_ok += gap <= 1e-12 * std::max(1.0, std::abs(mean));
    ensemble_sigma_zero += p.sigma_hat == 0.0;
    largest_sigma = std::max(largest_sigma, p.sigma_hat);
    member_sigma_zero += all_members_zero;
    n500 += p.n_samples == 500;
  }

  const auto half = mc_members(0.5);
  std::size_t positive = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto p = mc_predict(std::span<const TokenModel<float>>(half), "w" + std::to_string(w),
                              words[w], mc);
    positive += p.sigma_hat > 0.0;
    n500 += p.n_samples == 500;
  }

  const bool ok = ensemble_sigma_zero == 100 && mean_ok == 100 && positive >= 99 && n500 == 200;
  return verdict(ok, "rate 0: ensemble sigma_hat == 0 on " + std::to_string(ensemble_sigma_zero) +
                         "/100 (pooled 500-sample sigma keeps the between-member spread, max " +
                         fmt(largest_sigma) + "); single-member sigma_hat == 0 on " +
                         std::to_string(member_sigma_zero) + "/100; h_hat == member mean on " +
                         std::to_string(mean_ok) + "/100 (max gap " + fmt(worst_mean_gap) +
                         "); rate 0.5: sigma_hat > 0 on " + std::to_string(positive) +
                         "/100; n_samples == 500 on " + std::to_string(n500) + "/200");
}

// ------------------------------------------------------------------ AC5 / AC9 shared run

RunConfig sample_config(const fs::path& run_dir) {
  ConfigMap c;
  c.set("paths.lexicon", (kSample / "labmt_sample500.tsv").string());
  c.set("paths.vectors", (kSample / "vectors50.txt").string());
  c.set("paths.run_dir", run_dir.string());
  c.set("train.threads", "1");
  return RunConfig(c);
}

Verdict learning_signal(const fs::path& run_dir) {
  const auto t0 = Clock::now();
  const auto cfg = sample_config(run_dir);
  std::ostringstream log;
  const auto summary = cmd_train(cfg, log);

  const Lexicon lex = parse_lexicon(cfg.lexicon);
  const Splits splits = make_splits(lex, cfg.split);
  const auto& tr = splits.train[0];
  const auto& va = splits.val[0];
  double mean = 0.0;
  for (auto i : tr) mean += lex[i].h_avg;
  mean /= static_cast<double>(tr.size());
  double constant_mae = 0.0;
  for (auto i : va) constant_mae += std::abs(lex[i].h_avg - mean);
  constant_mae /= static_cast<double>(va.size());
  const double fold_mae = summary.folds[0].best_val_mae;
  const double reduction = 1.0 - fold_mae / constant_mae;

  // Memorization: the first 100 fold-0 training words, fit and scored on
  // themselves, same model and optimizer settings, early stopping off.
  std::vector<std::vector<std::string>> grams;
  std::vector<bool> held(lex.size(), false);
  for (auto i : splits.holdout) held[i] = true;
  for (std::size_t i = 0; i < lex.size(); ++i) {
    if (!held[i]) grams.push_back(char_ngrams(lex[i].word, cfg.ngrams));
  }
  const TokenVocab vocab = build_vocab(grams);
  const auto encode = token_encoder(vocab, cfg.ngrams);
  Dataset mem;
  for (std::size_t k = 0; k < 100; ++k) {
    mem.inputs.push_back(encode(lex[tr[k]].word));
    mem.targets.push_back(lex[tr[k]].h_avg);
  }
  TokenModelConfig mc = cfg.token;
  mc.vocab_size = vocab.size();
  const auto seed = derive_seed(cfg.init_seed, "memorize");
  TokenModel<float> model(
      mc, load_pretrained<float>(cfg.vectors, vocab, mc.embed_dim, derive_seed(seed, "oov")), seed);
  TrainConfig tc = cfg.train;
  tc.patience = 0;
  const auto r = train_fold(model, mem, mem, tc, 0);
  std::size_t first_below = 0;
  for (const auto& e : r.history) {
    if (e.val_mae < 0.2) {
      first_below = e.epoch;
      break;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = reduction >= 0.15 && first_below > 0 && secs < 600;
  return verdict(ok, "fold 0 val MAE " + fmt(fold_mae) + " vs constant-mean " + fmt(constant_mae) +
                         " (" + fmt(100 * reduction, 3) + "% lower, need >= 15%); 100-word train MAE " +
                         (first_below ? "< 0.2 at epoch " + std::to_string(first_below)
                                      : "min " + fmt(r.best_val_mae) + ", never < 0.2") +
                         " of 500; " + fmt(secs, 3) + " s < 600 s (5-fold train + memorization)");
}

// ------------------------------------------------------------------ AC6

Verdict full_scale_token(const fs::path& scratch) {
  const char* lex_path = std::getenv("LEXAUG_FULL_LEXICON");
  const char* vec_path = std::getenv("LEXAUG_FULL_VECTORS");
  if (!lex_path || !vec_path) {
    return {Outcome::Skip,
            "optional/network: set LEXAUG_FULL_LEXICON and LEXAUG_FULL_VECTORS (300-d) to run"};
  }
  const auto t0 = Clock::now();
  ConfigMap c;
  c.set("paths.lexicon", lex_path);
  c.set("paths.vectors", vec_path);
  c.set("paths.run_dir", (scratch / "full").string());
  c.set("token.embed_dim", "300");
  const char* threads = std::getenv("LEXAUG_THREADS");
  if (threads) c.set("train.threads", threads);
  std::ostringstream log;
  cmd_train(RunConfig(c), log);
  const auto s = cmd_evaluate(scratch / "full", std::nullopt, log);
  double best_single = 1e9, worst_single = 0.0;
  for (const auto& [label, m] : s.singles) {
    best_single = std::min(best_single, m);
    worst_single = std::max(worst_single, m);
  }
  const double secs = seconds_since(t0);
  const bool ok = best_single <= 0.75 && s.ensemble.mae <= worst_single && secs <= 3600;
  return verdict(ok, "best single holdout MAE " + fmt(best_single) + " <= 0.75 (reference 0.62); ensemble " +
                         fmt(s.ensemble.mae) + " <= worst single " + fmt(worst_single) + "; " +
                         fmt(secs, 4) + " s <= 3600 s");
}

// ------------------------------------------------------------------ AC7

Verdict human_baseline_reproduction() {
  const Lexicon lex = parse_lexicon(kSource / "data" / "labmt" / "labmt1.tsv");
  const auto h = human_baseline(lex);
  struct Cited {
    const char* word;
    double h;
    SentimentGroup group;
  };
  const Cited cited[] = {{"the", 4.98, SentimentGroup::Neutral},
                         {"cigarettes", 3.31, SentimentGroup::Negative},
                         {"hahaha", 7.94, SentimentGroup::Positive}};
  bool groups_ok = true;
  std::string groups;
  for (const auto& c : cited) {
    const auto* e = lex.find(c.word);
    const bool ok = e && std::abs(e->h_avg - c.h) < 1e-9 && group_of(e->h_avg) == c.group &&
                    group_of(c.h) == c.group;
    groups_ok = groups_ok && ok;
    groups += std::string(" ") + c.word + " " + fmt(c.h, 3) + "->" + to_string(group_of(c.h));
  }
  // The report table carries both human rows.
  const auto table = table_csv({{"Human ratings (standard deviation)", "computed", h.mean_sigma,
                                 h.sigma_percentiles},
                                {"Human ratings (variance)", "computed", h.mean_variance,
                                 h.variance_percentiles}});
  const bool rows_ok = table.find("Human ratings (variance)") != std::string::npos;
  const bool ok = std::abs(h.mean_sigma - 1.38) <= 0.02 && groups_ok && rows_ok;
  return verdict(ok, "mean sigma " + fmt(h.mean_sigma) + " over " + std::to_string(lex.size()) +
                         " words (1.38 +/- 0.02); mean sigma^2 " + fmt(h.mean_variance) +
                         " printed alongside (squared mean sigma " + fmt(h.squared_mean_sigma) +
                         ");" + groups);
}

// ------------------------------------------------------------------ AC8

Verdict transformer_invariants() {
  Rng rng(808);
  DictionaryModelConfig cfg;
  cfg.encoder.vocab_size = 30;
  cfg.encoder.layers = 2;
  cfg.encoder.heads = 2;
  cfg.encoder.model_dim = 8;
  cfg.encoder.ff_dim = 16;
  cfg.encoder.max_seq_len = 24;
  cfg.hidden = {16, 8, 4};

  DictionaryModel<double> dm(cfg, 81);
  double worst_row = 0.0;
  std::size_t masked_nonzero = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    const auto seq = random_sequence(rng, n, 16, 30);
    const auto out = dm.encode(seq);
    for (const auto& layer : out.attention) {
      for (const auto& P : layer) {
        for (std::size_t i = 0; i < P.rows(); ++i) {
          double sum = 0.0;
          for (std::size_t j = 0; j < P.cols(); ++j) {
            if (j < n) {
              sum += P(i, j);
            } else {
              masked_nonzero += P(i, j) != 0.0;
            }
          }
          worst_row = std::max(worst_row, std::abs(sum - 1.0));
        }
      }
    }
  }

  DictionaryModel<float> fm(cfg, 82);
  std::size_t pad_changed = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + uniform_index(rng, 12);
    const auto seq = random_sequence(rng, n, n, 30);
    auto padded = seq;
    const std::size_t extra = 1 + uniform_index(rng, 24 - n);
    padded.ids.resize(n + extra, kPadId);
    padded.mask.resize(n + extra, false);
    pad_changed += fm.predict(std::vector{seq}) != fm.predict(std::vector{padded});
  }

  auto nopos = cfg;
  nopos.encoder.positional = false;
  DictionaryModel<double> np(nopos, 83);
  double worst_perm = 0.0;
  for (int t = 0; t < 10; ++t) {
    // Position 0 holds the pooled class token; the rest are permuted.
    const std::size_t n = 3 + uniform_index(rng, 10);
    const auto seq = random_sequence(rng, n, 16, 30);
    auto perm = seq;
    std::vector<std::size_t> order(n - 1);
    std::iota(order.begin(), order.end(), 1u);
    do shuffle(order, rng);
    while (std::is_sorted(order.begin(), order.end()));
    for (std::size_t i = 1; i < n; ++i) perm.ids[i] = seq.ids[order[i - 1]];
    const double a = np.predict(std::vector{seq})[0], b = np.predict(std::vector{perm})[0];
    worst_perm = std::max(worst_perm, std::abs(a - b) / std::max(1.0, std::abs(a)));
  }

  const bool ok = worst_row <= 1e-6 && masked_nonzero == 0 && pad_changed == 0 && worst_perm < 1e-12;
  return verdict(ok, "attention row sum max |1 - s| " + fmt(worst_row) + " <= 1e-6; masked weights != 0: " +
                         std::to_string(masked_nonzero) + "; PAD changed prediction " +
                         std::to_string(pad_changed) + "/100 (float, exact); no-position permutation max rel diff " +
                         fmt(worst_perm) + " (10 pairs, double)");
}

// ------------------------------------------------------------------ AC9

Verdict pipeline_reproducibility(const fs::path& first_run, const fs::path& scratch) {
  const auto second = scratch / "repeat";
  std::ostringstream log;
  cmd_train(sample_config(second), log);
  const bool splits_equal = read_file(run_files::splits(first_run)) == read_file(run_files::splits(second));
  cmd_evaluate(first_run, std::nullopt, log);
  cmd_evaluate(second, std::nullopt, log);
  std::vector<std::string> differing;
  for (const auto& name : {"report.json", "table.csv", "groups.csv", "top_errors.csv", "iou.csv"}) {
    if (read_file(run_files::eval_dir(first_run) / name) != read_file(run_files::eval_dir(second) / name)) {
      differing.emplace_back(name);
    }
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const auto name = run_files::member(first_run, k).filename().string() + ".bin";
    if (read_file(first_run / name) != read_file(second / name)) differing.push_back(name);
  }
  return verdict(splits_equal && differing.empty(),
                 std::string("split files ") + (splits_equal ? "identical" : "differ") +
                     "; eval reports and checkpoints byte-equal" +
                     (differing.empty() ? "" : " except " + join(differing, ", ")) +
                     " (train.threads = 1)");
}

// ------------------------------------------------------------------ AC10

Verdict definition_pipeline(const fs::path& scratch) {
  const fs::path fixtures = kSource / "data" / "fixtures" / "defs";
  std::vector<std::string> words;
  for (const auto& entry : fs::directory_iterator(fixtures)) words.push_back(entry.path().stem().string());
  std::sort(words.begin(), words.end());
  for (const char* w : {"zzqxv", "lmao", "hahaha"}) words.emplace_back(w);

  FixtureTransport inner(fixtures);
  CountingTransport counter(inner);
  RateLimiter limiter(2, std::chrono::milliseconds(0));
  FetchContext ctx;
  ctx.transport = &counter;
  ctx.endpoint = "https://fixtures.invalid/api/v2/entries/en";  // no trailing slash
  ctx.limiter = &limiter;
  const auto cache_path = scratch / "defs_cache.jsonl";
  DefinitionCache cache(cache_path);
  const auto first = fetch_all(words, cache, ctx, 30 * 86400);
  const std::size_t first_calls = counter.count();

  const auto vocab = SubwordVocab::load(kSample / "subword_vocab.txt");
  DefinitionEncoding enc;
  enc.seq_len = 4096;  // no subword truncation: every kept word is visible
  std::size_t max_words = 0, raw_over = 0, found = 0, missing = 0, bad_missing = 0, bad_length = 0;
  for (const auto& w : words) {
    const auto* r = cache.find(w);
    const auto text = definition_text(r, 50);
    const auto kept = split_whitespace(text).size();
    max_words = std::max(max_words, kept);
    const auto seq = encode_definition(w, text, vocab, enc);
    const std::size_t word_pieces = wordpiece_tokenize(w, vocab).size();
    const std::size_t def_pieces = wordpiece_tokenize(text, vocab).size();
    bad_length += seq.valid_length() != 2 + word_pieces + def_pieces;
    if (r && r->status == DefinitionStatus::Found) {
      ++found;
      std::size_t raw = 0;
      for (const auto& d : r->definitions) raw += split_whitespace(d).size();
      raw_over += raw > 50;
    } else if (r && r->status == DefinitionStatus::Missing) {
      ++missing;
      bad_missing += seq.valid_length() != word_pieces + 2 || seq.ids[word_pieces + 1] != vocab.sep_id();
    }
  }

  const auto second = fetch_all(words, cache, ctx, 30 * 86400);
  DefinitionCache reopened(cache_path);
  const auto third = fetch_all(words, reopened, ctx, 30 * 86400);
  const std::size_t repeat_calls = counter.count() - first_calls;

  const bool ok = max_words <= 50 && bad_missing == 0 && bad_length == 0 && repeat_calls == 0 &&
                  first.errors == 0 && missing > 0 && raw_over > 0;
  return verdict(ok, std::to_string(words.size()) + " words (" + std::to_string(found) + " Found, " +
                         std::to_string(missing) + " Missing); max definition words " +
                         std::to_string(max_words) + " <= 50 (" + std::to_string(raw_over) +
                         " raw definitions exceed 50); Missing not word-only: " +
                         std::to_string(bad_missing) + "; encoded-length mismatches: " +
                         std::to_string(bad_length) + "; calls first pass " +
                         std::to_string(first_calls) + ", second pass and reopened cache " +
                         std::to_string(repeat_calls) + " (cache hits " +
                         std::to_string(second.cache_hits) + ", " + std::to_string(third.cache_hits) + ")");
}

// ------------------------------------------------------------------ driver

std::set<std::string> parse_ids(const std::string& s) {
  std::set<std::string> out;
  for (const auto& p : split(s, ',')) {
    const auto t = trim(p);
    if (!t.empty()) out.emplace(t);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only, expect_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if ((a == "--only" || a == "--expect-fail") && i + 1 < argc) {
      (a == "--only" ? only : expect_fail) = parse_ids(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only AC1,AC2] [--expect-fail AC4]\n";
      return 2;
    }
  }

  ScratchDir scratch("run");
  const fs::path sample_run = scratch.path() / "sample";
  bool sample_trained = false;

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"AC1", gradient_correctness},
      {"AC2", oracle_equivalence},
      {"AC3", split_integrity},
      {"AC4", mc_dropout_semantics},
      {"AC5", [&] {
         sample_trained = true;
         return learning_signal(sample_run);
       }},
      {"AC6", [&] { return full_scale_token(scratch.path()); }},
      {"AC7", human_baseline_reproduction},
      {"AC8", transformer_invariants},
      {"AC9", [&] {
         if (!sample_trained) {
           std::ostringstream log;
           cmd_train(sample_config(sample_run), log);
         }
         return pipeline_reproducibility(sample_run, scratch.path());
       }},
      {"AC10", [&] { return definition_pipeline(scratch.path()); }},
  };

  std::set<std::string> failed;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::Fail) failed.insert(id);
    std::cout << id << " " << tag << " " << v.detail;
    if (v.outcome == Outcome::Fail && expect_fail.count(id)) std::cout << " [expected failure]";
    std::cout << std::endl;
  }
  std::set<std::string> relevant;
  for (const auto& id : expect_fail) {
    if (only.empty() || only.count(id)) relevant.insert(id);
  }
  if (failed != relevant) {
    std::cout << "acceptance: failing set differs from the expected set" << std::endl;
    return 1;
  }
  return 0;
}
