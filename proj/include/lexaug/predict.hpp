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

// Monte-Carlo-dropout prediction over an ensemble, prediction intervals and
// augmented-lexicon output.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/lexicon.hpp"
#include "lexaug/nn.hpp"

namespace lexaug {

struct McConfig {
  std::size_t samples_per_model = 100;
  std::uint64_t seed = 0;
  /// Keep every sample in the Prediction (tests and calibration studies).
  bool keep_samples = false;

  void validate() const {
    if (samples_per_model < 1) throw InputError("samples_per_model must be at least 1");
  }
};

struct Prediction {
  std::string word;
  double h_hat = 0.0;  // raw mean, not clipped
  double sigma_hat = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::string> sources;
  std::vector<double> samples;

  double h_hat_clipped() const { return std::clamp(h_hat, kScaleMin, kScaleMax); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

inline Interval interval(const Prediction& p) {
  return {p.h_hat - p.sigma_hat, p.h_hat + p.sigma_hat};
}

/// Report-layer view: the interval clipped to the rating scale.
inline Interval clip_to_scale(Interval iv) {
  return {std::clamp(iv.lo, kScaleMin, kScaleMax), std::clamp(iv.hi, kScaleMin, kScaleMax)};
}

/// Mean and population standard deviation, accumulated in double. Equal
/// samples give a standard deviation of exactly zero.
inline std::pair<double, double> mean_and_pop_std(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

/// Pools samples_per_model Train-mode passes from every member. Each member
/// draws from a stream derived from (seed, word, member index).
template <Regressor M>
Prediction mc_predict(std::span<const M> members, const std::string& word,
                      const TokenSequence& input, const McConfig& cfg,
                      const std::vector<std::string>& member_ids = {}) {
  using T = typename M::Scalar;
  cfg.validate();
  if (word.empty()) throw InputError("cannot predict an empty word");
  if (members.empty()) throw InputError("ensemble has no members");
  Prediction out;
  out.word = word;
  std::vector<double> pooled;
  pooled.reserve(members.size() * cfg.samples_per_model);
  const std::vector<TokenSequence> batch(cfg.samples_per_model, input);
  const std::uint64_t word_seed = derive_seed(cfg.seed, word);
  for (std::size_t m = 0; m < members.size(); ++m) {
    Rng rng(derive_seed(word_seed, m));
    auto drop = Dropout<T>::train(rng);
    typename M::Cache cache;
    for (T v : members[m].forward(batch, drop, cache)) pooled.push_back(static_cast<double>(v));
    out.sources.push_back(m < member_ids.size() ? member_ids[m] : "member_" + std::to_string(m));
  }
  const auto [mean, sd] = mean_and_pop_std(pooled);
  out.h_hat = mean;
  out.sigma_hat = sd;
  out.n_samples = pooled.size();
  if (cfg.keep_samples) out.samples = std::move(pooled);
  return out;
}

struct AugmentRow {
  Prediction prediction;
  std::string provenance = "model";
};

struct AugmentResult {
  std::vector<AugmentRow> rows;
  std::vector<std::string> notices;                          // skipped words
  std::vector<std::pair<std::string, std::string>> failures;  // word, message
};

/// One model row per input word. Words the lexicon already rates are skipped
/// (with a notice) unless `force`; per-word failures are recorded.
template <Regressor M>
AugmentResult augment_lexicon(
    std::span<const M> members, const Lexicon& lexicon, const std::vector<std::string>& words,
    const std::function<TokenSequence(const std::string&)>& encode, const McConfig& cfg,
    bool force = false, const std::vector<std::string>& member_ids = {}) {
  AugmentResult res;
  for (const auto& raw : words) {
    const std::string word = normalize_word(raw);
    if (word.empty()) {
      res.failures.emplace_back(raw, "empty word");
      continue;
    }
    if (!force && lexicon.contains(word)) {
      res.notices.push_back("skipped '" + word + "': already human-rated");
      continue;
    }
    try {
      res.rows.push_back({mc_predict(members, word, encode(word), cfg, member_ids), "model"});
    } catch (const Error& e) {
      res.failures.emplace_back(word, e.what());
    }
  }
  return res;
}

/// labMT-compatible TSV (readable by parse_lexicon) with the extra columns
/// sigma_hat, h_hat_raw, n_samples, provenance and model_hash.
inline std::string serialize_augmented(const AugmentResult& res,
                                       const std::string& model_hash) {
  std::string out =
      "word\thappiness_rank\thappiness_average\thappiness_standard_deviation\t"
      "sigma_hat\th_hat_raw\tn_samples\tprovenance\tmodel_hash\n";
  for (const auto& row : res.rows) {
    const auto& p = row.prediction;
    out += p.word + "\t--\t" + format_fixed(p.h_hat_clipped()) + "\t" +
           format_fixed(p.sigma_hat) + "\t" + format_fixed(p.sigma_hat) + "\t" +
           format_double(p.h_hat) + "\t" + std::to_string(p.n_samples) + "\t" +
           row.provenance + "\t" + model_hash + "\n";
  }
  return out;
}

}  // namespace lexaug
