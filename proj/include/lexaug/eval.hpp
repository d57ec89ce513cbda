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

// Error metrics and report emission: MAE, percentiles, polarity-group
// breakdowns, interval IOU against human bands, top-error tables and the
// human-rating baseline.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexaug/common.hpp"
#include "lexaug/lexicon.hpp"
#include "lexaug/predict.hpp"

namespace lexaug {

inline constexpr std::array<double, 5> kReportPercentiles{25, 50, 75, 85, 95};

inline double mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw InputError("mae: inputs must be nonempty and equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

inline double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  return mae(std::span<const double>(pred), std::span<const double>(truth));
}

/// Linear interpolation between closest ranks: position r/100 * (n - 1) in
/// the sorted values.
inline std::vector<double> percentiles(std::vector<double> values,
                                       std::span<const double> ranks) {
  if (values.empty()) throw InputError("percentiles of an empty list");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  const double last = static_cast<double>(values.size() - 1);
  for (double r : ranks) {
    if (!(r >= 0.0 && r <= 100.0)) throw InputError("percentile rank outside [0, 100]");
    const double pos = r / 100.0 * last;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    out.push_back(values[lo] + (values[hi] - values[lo]) * frac);
  }
  return out;
}

inline std::vector<double> percentiles(std::vector<double> values) {
  return percentiles(std::move(values), kReportPercentiles);
}

inline double interval_iou(Interval a, Interval b) {
  if (!(a.lo <= a.hi) || !(b.lo <= b.hi)) throw InputError("malformed interval");
  const double overlap = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
  const double uni = (a.hi - a.lo) + (b.hi - b.lo) - overlap;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return overlap / uni;
}

inline Interval human_interval(const LexiconEntry& e) {
  return {e.h_avg - e.sigma, e.h_avg + e.sigma};
}

/// One evaluated word: clipped prediction against its human rating.
struct EvalRow {
  std::string word;
  double pred = 0.0;      // clipped to [1, 9]
  double pred_raw = 0.0;
  double sigma_hat = 0.0;
  double truth = 0.0;
  double human_sigma = 0.0;
  double abs_error = 0.0;
  double iou = 0.0;
  SentimentGroup group = SentimentGroup::Neutral;
};

inline std::vector<EvalRow> evaluation_rows(const std::vector<Prediction>& preds,
                                            const Lexicon& lexicon) {
  std::vector<EvalRow> rows;
  for (const auto& p : preds) {
    const auto* e = lexicon.find(p.word);
    if (!e) throw InputError("no human rating for evaluated word '" + p.word + "'");
    EvalRow r;
    r.word = p.word;
    r.pred_raw = p.h_hat;
    r.pred = p.h_hat_clipped();
    r.sigma_hat = p.sigma_hat;
    r.truth = e->h_avg;
    r.human_sigma = e->sigma;
    r.abs_error = std::abs(r.pred - r.truth);
    r.iou = interval_iou(clip_to_scale(interval(p)), clip_to_scale(human_interval(*e)));
    r.group = group_of(e->h_avg);
    rows.push_back(std::move(r));
  }
  return rows;
}

struct GroupErrors {
  std::map<SentimentGroup, std::vector<double>> errors;
  std::map<SentimentGroup, std::vector<std::string>> words;

  double group_mae(SentimentGroup g) const {
    const auto it = errors.find(g);
    if (it == errors.end() || it->second.empty()) return 0.0;
    double s = 0.0;
    for (double v : it->second) s += v;
    return s / static_cast<double>(it->second.size());
  }
  std::size_t count(SentimentGroup g) const {
    const auto it = errors.find(g);
    return it == errors.end() ? 0 : it->second.size();
  }
};

inline constexpr std::array<SentimentGroup, 3> kGroups{
    SentimentGroup::Negative, SentimentGroup::Neutral, SentimentGroup::Positive};

inline GroupErrors group_errors(const std::vector<EvalRow>& rows) {
  GroupErrors g;
  for (auto grp : kGroups) {
    g.errors[grp];
    g.words[grp];
  }
  for (const auto& r : rows) {
    g.errors[r.group].push_back(r.abs_error);
    g.words[r.group].push_back(r.word);
  }
  return g;
}

/// Descending absolute error, ties by word; k is clamped to the set size.
inline std::vector<EvalRow> top_errors(std::vector<EvalRow> rows, std::size_t k = 50) {
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    if (a.abs_error != b.abs_error) return a.abs_error > b.abs_error;
    return a.word < b.word;
  });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

struct HumanBaseline {
  std::size_t n = 0;
  double mean_sigma = 0.0;
  double mean_variance = 0.0;          // mean of sigma^2
  double squared_mean_sigma = 0.0;     // (mean sigma)^2
  std::vector<double> sigma_percentiles;
  std::vector<double> variance_percentiles;
};

inline HumanBaseline human_baseline(const Lexicon& lex) {
  if (lex.empty()) throw InputError("human baseline of an empty lexicon");
  HumanBaseline h;
  std::vector<double> sig, var;
  for (const auto& e : lex.entries()) {
    if (!std::isfinite(e.sigma)) throw InputError("missing sigma for '" + e.word + "'");
    sig.push_back(e.sigma);
    var.push_back(e.sigma * e.sigma);
  }
  h.n = sig.size();
  double s = 0.0, v = 0.0;
  for (std::size_t i = 0; i < sig.size(); ++i) {
    s += sig[i];
    v += var[i];
  }
  h.mean_sigma = s / static_cast<double>(h.n);
  h.mean_variance = v / static_cast<double>(h.n);
  h.squared_mean_sigma = h.mean_sigma * h.mean_sigma;
  h.sigma_percentiles = percentiles(sig);
  h.variance_percentiles = percentiles(var);
  return h;
}

/// Previously published results, carried into reports as labeled reference
/// values (never used as test ground truth).
struct ReferenceRow {
  const char* model;
  std::array<double, 6> values;  // average, then the five percentiles
};

inline constexpr std::array<ReferenceRow, 20> kPublishedResults{{
    {"ElasticNet + Word2Vec", {0.81, 0.82, 0.81, 0.82, 0.82, 0.83}},
    {"ElasticNet + GloVe", {0.81, 0.82, 0.81, 0.82, 0.82, 0.82}},
    {"ElasticNet + FastText", {0.81, 0.82, 0.81, 0.82, 0.82, 0.82}},
    {"LASSO + Word2Vec", {0.81, 0.81, 0.81, 0.81, 0.82, 0.83}},
    {"LASSO + GloVe", {0.81, 0.81, 0.82, 0.82, 0.82, 0.82}},
    {"LASSO + FastText", {0.81, 0.80, 0.81, 0.81, 0.81, 0.82}},
    {"Ridge + Word2Vec", {0.73, 0.73, 0.73, 0.74, 0.74, 0.75}},
    {"Ridge + GloVe", {0.75, 0.74, 0.75, 0.75, 0.77, 0.79}},
    {"Ridge + FastText", {0.73, 0.73, 0.73, 0.74, 0.74, 0.74}},
    {"RF + Word2Vec", {0.69, 0.69, 0.70, 0.70, 0.71, 0.78}},
    {"RF + GloVe", {0.70, 0.70, 0.70, 0.71, 0.71, 0.71}},
    {"RF + FastText", {0.68, 0.67, 0.68, 0.68, 0.68, 0.69}},
    {"SVR + Word2Vec", {0.65, 0.65, 0.65, 0.66, 0.66, 0.67}},
    {"SVR + GloVe", {0.67, 0.68, 0.67, 0.66, 0.68, 0.69}},
    {"SVR + FastText", {0.64, 0.64, 0.64, 0.65, 0.66, 0.66}},
    {"Token Model (single)", {0.62, 0.60, 0.61, 0.64, 0.65, 0.66}},
    {"Token Model (ensemble)", {0.57, 0.29, 0.44, 0.66, 0.72, 0.77}},
    {"Dictionary Model (single)", {0.50, 0.49, 0.50, 0.51, 0.51, 0.52}},
    {"Dictionary Model (ensemble)", {0.45, 0.15, 0.31, 0.40, 0.52, 0.59}},
    {"Human ratings (standard deviation)", {1.38, 1.18, 1.36, 1.56, 1.69, 1.90}},
}};

inline constexpr ReferenceRow kPublishedHumanVariance{
    "Human ratings (variance)", {1.99, 1.39, 1.85, 2.43, 2.86, 3.61}};

struct TableRow {
  std::string model;
  std::string source;  // "computed" or "published"
  double average = 0.0;
  std::vector<double> pct;
};

inline std::string table_csv(const std::vector<TableRow>& rows) {
  std::string out = "model,source,average,p25,p50,p75,p85,p95\n";
  for (const auto& r : rows) {
    out += "\"" + r.model + "\"," + r.source + "," + format_fixed(r.average, 4);
    for (double v : r.pct) out += "," + format_fixed(v, 4);
    out += "\n";
  }
  return out;
}

inline std::vector<TableRow> published_reference_rows(bool include_human = true) {
  std::vector<TableRow> rows;
  auto add = [&](const ReferenceRow& r) {
    rows.push_back({r.model, "published", r.values[0],
                    std::vector<double>(r.values.begin() + 1, r.values.end())});
  };
  for (const auto& r : kPublishedResults) {
    if (!include_human && std::string(r.model).rfind("Human", 0) == 0) continue;
    add(r);
  }
  if (include_human) add(kPublishedHumanVariance);
  return rows;
}

struct ErrorReport {
  std::string model_label;
  std::vector<EvalRow> rows;
  double mae = 0.0;
  std::vector<double> pct;
  GroupErrors groups;
  HumanBaseline human;
  std::vector<EvalRow> top;
  double mean_iou = 0.0;
  std::vector<double> iou_pct;
};

inline ErrorReport build_report(const std::string& label, const std::vector<Prediction>& preds,
                                const Lexicon& lexicon, std::size_t top_k = 50) {
  if (preds.empty()) throw InputError("nothing to evaluate");
  ErrorReport r;
  r.model_label = label;
  r.rows = evaluation_rows(preds, lexicon);
  std::vector<double> errs, ious;
  for (const auto& row : r.rows) {
    errs.push_back(row.abs_error);
    ious.push_back(row.iou);
  }
  double s = 0.0, si = 0.0;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    s += errs[i];
    si += ious[i];
  }
  r.mae = s / static_cast<double>(errs.size());
  r.mean_iou = si / static_cast<double>(ious.size());
  r.pct = percentiles(errs);
  r.iou_pct = percentiles(ious);
  r.groups = group_errors(r.rows);
  std::vector<LexiconEntry> evaluated;
  for (const auto& row : r.rows) evaluated.push_back(*lexicon.find(row.word));
  r.human = human_baseline(Lexicon(std::move(evaluated), "evaluated"));
  r.top = top_errors(r.rows, top_k);
  return r;
}

inline nlohmann::json row_json(const EvalRow& r) {
  return {{"word", r.word},        {"pred", r.pred},
          {"pred_raw", r.pred_raw}, {"sigma_hat", r.sigma_hat},
          {"truth", r.truth},      {"human_sigma", r.human_sigma},
          {"abs_error", r.abs_error}, {"iou", r.iou},
          {"group", to_string(r.group)}};
}

inline nlohmann::json report_json(const ErrorReport& r) {
  nlohmann::json j;
  j["model"] = r.model_label;
  j["n"] = r.rows.size();
  j["mae"] = r.mae;
  j["percentile_ranks"] = kReportPercentiles;
  j["mae_percentiles"] = r.pct;
  nlohmann::json groups;
  for (auto g : kGroups) {
    groups[to_string(g)] = {{"count", r.groups.count(g)},
                            {"mae", r.groups.group_mae(g)},
                            {"errors", r.groups.errors.at(g)}};
  }
  j["groups"] = groups;
  j["human_baseline"] = {{"n", r.human.n},
                         {"mean_sigma", r.human.mean_sigma},
                         {"mean_variance", r.human.mean_variance},
                         {"squared_mean_sigma", r.human.squared_mean_sigma},
                         {"sigma_percentiles", r.human.sigma_percentiles},
                         {"variance_percentiles", r.human.variance_percentiles}};
  j["iou"] = {{"mean", r.mean_iou}, {"percentiles", r.iou_pct}};
  nlohmann::json top = nlohmann::json::array();
  for (const auto& row : r.top) top.push_back(row_json(row));
  j["top_errors"] = top;
  nlohmann::json all = nlohmann::json::array();
  for (const auto& row : r.rows) all.push_back(row_json(row));
  j["rows"] = all;
  nlohmann::json ref = nlohmann::json::array();
  for (const auto& row : published_reference_rows()) {
    ref.push_back({{"model", row.model}, {"average", row.average}, {"percentiles", row.pct}});
  }
  j["published_reference"] = ref;
  return j;
}

/// Summary table: this model, the human rows computed on the evaluated
/// words, then the published reference rows.
inline std::string report_table_csv(const ErrorReport& r) {
  std::vector<TableRow> rows;
  rows.push_back({r.model_label, "computed", r.mae, r.pct});
  rows.push_back({"Human ratings (standard deviation)", "computed", r.human.mean_sigma,
                  r.human.sigma_percentiles});
  rows.push_back({"Human ratings (variance)", "computed", r.human.mean_variance,
                  r.human.variance_percentiles});
  for (auto& row : published_reference_rows()) rows.push_back(std::move(row));
  return table_csv(rows);
}

/// Long-format rows for error histograms by polarity group.
inline std::string group_plot_csv(const ErrorReport& r) {
  std::string out = "group,word,abs_error\n";
  for (auto g : kGroups) {
    const auto& errs = r.groups.errors.at(g);
    const auto& words = r.groups.words.at(g);
    for (std::size_t i = 0; i < errs.size(); ++i) {
      out += std::string(to_string(g)) + "," + words[i] + "," + format_fixed(errs[i]) + "\n";
    }
  }
  return out;
}

inline std::string top_errors_csv(const ErrorReport& r) {
  std::string out =
      "rank,word,pred,sigma_hat,truth,human_sigma,abs_error,iou,group\n";
  for (std::size_t i = 0; i < r.top.size(); ++i) {
    const auto& t = r.top[i];
    out += std::to_string(i + 1) + "," + t.word + "," + format_fixed(t.pred) + "," +
           format_fixed(t.sigma_hat) + "," + format_fixed(t.truth) + "," +
           format_fixed(t.human_sigma) + "," + format_fixed(t.abs_error) + "," +
           format_fixed(t.iou) + "," + to_string(t.group) + "\n";
  }
  return out;
}

inline std::string iou_plot_csv(const ErrorReport& r) {
  std::string out = "word,pred_lo,pred_hi,human_lo,human_hi,iou\n";
  for (const auto& row : r.rows) {
    const Interval p = clip_to_scale({row.pred_raw - row.sigma_hat, row.pred_raw + row.sigma_hat});
    const Interval h = clip_to_scale({row.truth - row.human_sigma, row.truth + row.human_sigma});
    out += row.word + "," + format_fixed(p.lo) + "," + format_fixed(p.hi) + "," +
           format_fixed(h.lo) + "," + format_fixed(h.hi) + "," + format_fixed(row.iou) + "\n";
  }
  return out;
}

}  // namespace lexaug
