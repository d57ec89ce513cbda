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

// Holdout/k-fold splitting, the per-fold training loop with best-epoch
// selection, and ensemble assembly.

#pragma once

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/lexicon.hpp"
#include "lexaug/nn.hpp"

namespace lexaug {

struct SplitSpec {
  double holdout_fraction = 0.2;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const {
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
      throw InputError("holdout fraction must lie in [0, 1)");
    }
    if (folds < 2) throw InputError("need at least 2 folds");
  }
};

struct Splits {
  std::vector<std::size_t> holdout;
  std::vector<std::vector<std::size_t>> train;  // per fold
  std::vector<std::vector<std::size_t>> val;    // per fold

  std::size_t folds() const { return val.size(); }
  friend bool operator==(const Splits&, const Splits&) = default;
};

/// Seeded holdout + k-fold partition of [0, n). The stratified variant
/// spreads the holdout evenly over score order and deals each run of k
/// score-adjacent items to the folds in a random order.
inline Splits make_splits(std::size_t n, const SplitSpec& spec,
                          const std::vector<double>* scores = nullptr) {
  spec.validate();
  if (n < 10 * spec.folds) {
    throw InputError("dataset of " + std::to_string(n) + " items is too small for " +
                     std::to_string(spec.folds) + " folds (need at least " +
                     std::to_string(10 * spec.folds) + ")");
  }
  Rng rng(derive_seed(spec.seed, "splits"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);
  const auto n_hold = static_cast<std::size_t>(
      std::llround(spec.holdout_fraction * static_cast<double>(n)));
  const std::size_t k = spec.folds;
  Splits s;
  s.val.assign(k, {});
  s.train.assign(k, {});
  std::vector<std::size_t> rest;
  std::vector<std::size_t> fold_of(n, k);

  if (spec.stratified) {
    if (!scores || scores->size() != n) {
      throw InputError("stratified split needs one score per item");
    }
    // Stable sort of the shuffled order breaks score ties randomly.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (*scores)[a] < (*scores)[b];
    });
    std::vector<bool> held(n, false);
    for (std::size_t j = 0; j < n_hold; ++j) {
      const auto pos = static_cast<std::size_t>(
          (static_cast<double>(j) + 0.5) * static_cast<double>(n) /
          static_cast<double>(n_hold));
      held[order[pos]] = true;
      s.holdout.push_back(order[pos]);
    }
    for (std::size_t idx : order) {
      if (!held[idx]) rest.push_back(idx);
    }
    std::vector<std::size_t> deal(k);
    for (std::size_t start = 0; start < rest.size(); start += k) {
      std::iota(deal.begin(), deal.end(), std::size_t{0});
      shuffle(deal, rng);
      for (std::size_t j = 0; j < k && start + j < rest.size(); ++j) {
        fold_of[rest[start + j]] = deal[j];
      }
    }
  } else {
    s.holdout.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
    rest.assign(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
    const std::size_t base = rest.size() / k, extra = rest.size() % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t len = base + (f < extra ? 1 : 0);
      for (std::size_t j = 0; j < len; ++j) fold_of[rest[pos + j]] = f;
      pos += len;
    }
  }
  for (std::size_t idx : rest) {
    const std::size_t f = fold_of[idx];
    for (std::size_t g = 0; g < k; ++g) (g == f ? s.val[g] : s.train[g]).push_back(idx);
  }
  return s;
}

inline Splits make_splits(const Lexicon& lex, const SplitSpec& spec) {
  std::vector<double> scores;
  for (const auto& e : lex.entries()) scores.push_back(e.h_avg);
  return make_splits(lex.size(), spec, &scores);
}

inline std::string serialize_splits(const Splits& s) {
  std::string out;
  auto section = [&](const std::string& title, const std::vector<std::size_t>& ids) {
    out += "# " + title + "\n";
    for (std::size_t i : ids) out += std::to_string(i) + "\n";
  };
  section("holdout", s.holdout);
  for (std::size_t f = 0; f < s.folds(); ++f) {
    section("fold " + std::to_string(f) + " train", s.train[f]);
    section("fold " + std::to_string(f) + " val", s.val[f]);
  }
  return out;
}

inline Splits parse_splits(const std::string& text) {
  Splits s;
  std::vector<std::size_t>* current = nullptr;
  std::size_t lineno = 0;
  for (const auto& raw : split(text, '\n')) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto parts = split_whitespace(line.substr(1));
      if (parts.size() == 1 && parts[0] == "holdout") {
        current = &s.holdout;
      } else if (parts.size() == 3 && parts[0] == "fold") {
        long long f = 0;
        if (!parse_int(parts[1], f) || f < 0 || static_cast<std::size_t>(f) > s.val.size()) {
          throw ParseError(lineno, "bad fold header");
        }
        if (static_cast<std::size_t>(f) == s.val.size()) {
          s.val.emplace_back();
          s.train.emplace_back();
        }
        if (parts[2] == "train") {
          current = &s.train[static_cast<std::size_t>(f)];
        } else if (parts[2] == "val") {
          current = &s.val[static_cast<std::size_t>(f)];
        } else {
          throw ParseError(lineno, "bad fold section '" + parts[2] + "'");
        }
      } else {
        throw ParseError(lineno, "unknown section header");
      }
      continue;
    }
    long long v = 0;
    if (!current || !parse_int(line, v) || v < 0) {
      throw ParseError(lineno, "expected a non-negative index");
    }
    current->push_back(static_cast<std::size_t>(v));
  }
  return s;
}

// ---------------------------------------------------------------- training

struct TrainConfig {
  std::size_t max_epochs = 500;
  std::size_t batch_size = 32;
  /// Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 50;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_epochs < 1) throw InputError("max_epochs must be at least 1");
    if (batch_size < 1) throw InputError("batch_size must be at least 1");
    if (!(adam.lr >= 0.0)) throw InputError("learning rate must be non-negative");
  }
};

struct Dataset {
  std::vector<TokenSequence> inputs;
  std::vector<double> targets;

  std::size_t size() const { return inputs.size(); }
  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset d;
    for (std::size_t i : idx) {
      d.inputs.push_back(inputs[i]);
      d.targets.push_back(targets[i]);
    }
    return d;
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
};

struct FoldResult {
  std::size_t fold = 0;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
};

inline std::string history_csv(const FoldResult& r) {
  std::string out = "epoch,train_loss,val_mae\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
           format_double(e.val_mae) + "\n";
  }
  return out;
}

/// Raw (unclipped) mean absolute error of Infer-mode predictions.
template <Regressor M>
double evaluate_mae(const M& model, const Dataset& data, std::size_t batch_size = 256) {
  double s = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::span<const TokenSequence> batch(data.inputs.data() + start, end - start);
    const auto pred = model.predict(batch);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      s += std::abs(static_cast<double>(pred[i]) - data.targets[start + i]);
    }
  }
  return s / static_cast<double>(data.size());
}

/// Trains `model` in place and leaves it holding the parameters of the epoch
/// with the lowest validation MAE (earliest on ties).
template <Regressor M>
FoldResult train_fold(M& model, const Dataset& train, const Dataset& val,
                      const TrainConfig& cfg, std::size_t fold = 0) {
  using T = typename M::Scalar;
  cfg.validate();
  if (train.size() == 0 || val.size() == 0) {
    throw InputError("fold " + std::to_string(fold) + ": empty train or validation set");
  }
  Rng order_rng(derive_seed(derive_seed(cfg.seed, "order"), fold));
  Rng drop_rng(derive_seed(derive_seed(cfg.seed, "dropout"), fold));
  Adam<T> opt(cfg.adam);
  FoldResult result;
  result.fold = fold;

  auto snapshot = [&]() {
    std::vector<Tensor<T>> s;
    for (const auto& p : model.parameters()) s.push_back(*p.value);
    return s;
  };
  std::vector<Tensor<T>> best = snapshot();
  result.best_val_mae = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> perm(train.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<TokenSequence> batch;
  std::vector<double> target;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle(perm, order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(perm.size(), start + cfg.batch_size);
      batch.clear();
      target.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train.inputs[perm[i]]);
        target.push_back(train.targets[perm[i]]);
      }
      auto drop = Dropout<T>::train(drop_rng);
      typename M::Cache cache;
      model.zero_grad();
      const auto pred = model.forward(batch, drop, cache);
      const double loss = mse_loss(std::span<const T>(pred), std::span<const double>(target));
      if (!std::isfinite(loss)) {
        throw DivergenceError("fold " + std::to_string(fold) + " diverged at epoch " +
                              std::to_string(epoch) + ": non-finite training loss");
      }
      loss_sum += loss * static_cast<double>(end - start);
      model.backward(cache, mse_grad(std::span<const T>(pred), std::span<const double>(target)));
      apply_step(model, opt);
    }
    const double val_mae = evaluate_mae(model, val);
    if (!std::isfinite(val_mae)) {
      throw DivergenceError("fold " + std::to_string(fold) + " diverged at epoch " +
                            std::to_string(epoch) + ": non-finite validation MAE");
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(train.size()), val_mae});
    if (val_mae < result.best_val_mae) {
      result.best_val_mae = val_mae;
      result.best_epoch = epoch;
      best = snapshot();
    }
    if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) break;
  }
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = best[i];
  model.touch();
  return result;
}

template <class M>
struct Ensemble {
  std::vector<M> members;
  std::vector<FoldResult> folds;
  Splits splits;
};

/// One model per fold, built by `make_model(fold)`. Folds run on up to
/// `threads` workers with independent streams; results are stored by fold
/// index so the outcome does not depend on scheduling. The first failing
/// fold (by index) is rethrown.
template <Regressor M>
Ensemble<M> train_ensemble(const std::function<M(std::size_t)>& make_model,
                           const Dataset& data, const Splits& splits,
                           const TrainConfig& cfg, std::size_t threads = 1) {
  const std::size_t k = splits.folds();
  std::vector<std::optional<M>> models(k);
  std::vector<FoldResult> results(k);
  std::vector<std::exception_ptr> errors(k);
  auto run = [&](std::size_t f) {
    try {
      M model = make_model(f);
      results[f] = train_fold(model, data.subset(splits.train[f]),
                              data.subset(splits.val[f]), cfg, f);
      models[f] = std::move(model);
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (std::size_t f = 0; f < k; ++f) run(f);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, k); ++t) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t f;
          {
            std::lock_guard lock(mu);
            if (next >= k) return;
            f = next++;
          }
          run(f);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t f = 0; f < k; ++f) {
    if (errors[f]) std::rethrow_exception(errors[f]);
  }
  Ensemble<M> ens;
  ens.splits = splits;
  ens.folds = std::move(results);
  for (auto& m : models) ens.members.push_back(std::move(*m));
  return ens;
}

}  // namespace lexaug
