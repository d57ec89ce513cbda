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

// Linear baselines over pooled pre-trained word vectors: closed-form ridge
// and coordinate descent for lasso / elastic net.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/embed.hpp"
#include "lexaug/eval.hpp"
#include "lexaug/tokenize.hpp"
#include "lexaug/train.hpp"

namespace lexaug {

/// Row-major N x d design matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

enum class Regularizer { None, Ridge, Lasso, ElasticNet };

inline const char* to_string(Regularizer r) {
  switch (r) {
    case Regularizer::None: return "OLS";
    case Regularizer::Ridge: return "Ridge";
    case Regularizer::Lasso: return "LASSO";
    case Regularizer::ElasticNet: return "ElasticNet";
  }
  return "?";
}

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;
  Regularizer kind = Regularizer::None;
  double lambda = 0.0;
  double alpha = 0.0;
  /// Coordinate descent only: objective after each sweep.
  std::vector<double> objective_history;
  std::size_t iterations = 0;

  double predict(std::span<const double> x) const {
    double s = b;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
    return s;
  }

  std::vector<double> predict(const Matrix& X) const {
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      out[i] = predict(std::span<const double>(X.v.data() + i * X.cols, X.cols));
    }
    return out;
  }
};

namespace detail {

inline void check_design(const Matrix& X, const std::vector<double>& y) {
  if (X.rows == 0 || X.cols == 0) throw InputError("empty design matrix");
  if (y.size() != X.rows) throw ShapeError("target length does not match rows");
}

inline std::vector<double> column_means(const Matrix& X) {
  std::vector<double> m(X.cols, 0.0);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) m[j] += X(i, j);
  }
  for (auto& v : m) v /= static_cast<double>(X.rows);
  return m;
}

inline double mean(const std::vector<double>& y) {
  double s = 0.0;
  for (double v : y) s += v;
  return s / static_cast<double>(y.size());
}

/// Solves the symmetric positive definite system A x = rhs in place
/// (A is d x d, row-major) by Cholesky factorisation.
inline std::vector<double> cholesky_solve(std::vector<double> A, std::vector<double> rhs,
                                          std::size_t d) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < d; ++i) max_diag = std::max(max_diag, std::abs(A[i * d + i]));
  const double tiny = 1e-12 * std::max(max_diag, 1e-300);
  for (std::size_t j = 0; j < d; ++j) {
    double diag = A[j * d + j];
    for (std::size_t k = 0; k < j; ++k) diag -= A[j * d + k] * A[j * d + k];
    if (!(diag > tiny)) {
      throw Error("singular system: design matrix is rank-deficient for this lambda");
    }
    const double ljj = std::sqrt(diag);
    A[j * d + j] = ljj;
    for (std::size_t i = j + 1; i < d; ++i) {
      double s = A[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= A[i * d + k] * A[j * d + k];
      A[i * d + j] = s / ljj;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {  // L z = rhs
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= A[i * d + k] * rhs[k];
    rhs[i] = s / A[i * d + i];
  }
  for (std::size_t i = d; i-- > 0;) {  // L^T x = z
    double s = rhs[i];
    for (std::size_t k = i + 1; k < d; ++k) s -= A[k * d + i] * rhs[k];
    rhs[i] = s / A[i * d + i];
  }
  return rhs;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace detail

/// Closed form (Xc^T Xc + lambda I) w = Xc^T yc on centered data; the
/// intercept is not penalised.
inline LinearModel fit_ridge(const Matrix& X, const std::vector<double>& y, double lambda) {
  detail::check_design(X, y);
  if (!(lambda >= 0.0)) throw InputError("lambda must be non-negative");
  const std::size_t n = X.rows, d = X.cols;
  const auto xm = detail::column_means(X);
  const double ym = detail::mean(y);
  std::vector<double> A(d * d, 0.0), rhs(d, 0.0), row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) row[j] = X(i, j) - xm[j];
    const double yc = y[i] - ym;
    for (std::size_t j = 0; j < d; ++j) {
      rhs[j] += row[j] * yc;
      for (std::size_t k = 0; k <= j; ++k) A[j * d + k] += row[j] * row[k];
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    A[j * d + j] += lambda;
    for (std::size_t k = 0; k < j; ++k) A[k * d + j] = A[j * d + k];
  }
  LinearModel m;
  m.kind = lambda > 0.0 ? Regularizer::Ridge : Regularizer::None;
  m.lambda = lambda;
  m.w = detail::cholesky_solve(std::move(A), std::move(rhs), d);
  m.b = ym;
  for (std::size_t j = 0; j < d; ++j) m.b -= xm[j] * m.w[j];
  return m;
}

struct CoordinateDescentConfig {
  double lambda = 1.0;
  double alpha = 0.5;  // 1 = lasso
  std::size_t max_iter = 1000;
  double tol = 1e-4;
};

/// Minimises 1/(2N) |yc - Z beta|^2 + lambda alpha |beta|_1
/// + lambda (1 - alpha) / 2 |beta|^2 over internally standardised columns Z,
/// sweeping coordinates until the largest coefficient change is below tol.
/// Constant columns keep a zero weight.
inline LinearModel fit_coordinate_descent(const Matrix& X, const std::vector<double>& y,
                                          const CoordinateDescentConfig& cfg) {
  detail::check_design(X, y);
  if (!(cfg.lambda >= 0.0)) throw InputError("lambda must be non-negative");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
  const std::size_t n = X.rows, d = X.cols;
  const double N = static_cast<double>(n);
  const auto xm = detail::column_means(X);
  const double ym = detail::mean(y);
  std::vector<double> sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (X(i, j) - xm[j]) * (X(i, j) - xm[j]);
  }
  for (auto& s : sd) s = std::sqrt(s / N);
  // Column-major standardised copy for cache-friendly coordinate sweeps.
  std::vector<double> Z(n * d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    if (sd[j] == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) Z[j * n + i] = (X(i, j) - xm[j]) / sd[j];
  }
  std::vector<double> beta(d, 0.0), r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - ym;
  const double l1 = cfg.lambda * cfg.alpha;
  const double l2 = cfg.lambda * (1.0 - cfg.alpha);
  auto objective = [&] {
    double rss = 0.0, a1 = 0.0, a2 = 0.0;
    for (double v : r) rss += v * v;
    for (double bj : beta) {
      a1 += std::abs(bj);
      a2 += bj * bj;
    }
    return rss / (2.0 * N) + l1 * a1 + 0.5 * l2 * a2;
  };

  LinearModel m;
  m.kind = cfg.alpha == 1.0 ? Regularizer::Lasso : Regularizer::ElasticNet;
  m.lambda = cfg.lambda;
  m.alpha = cfg.alpha;
  bool converged = false;
  for (std::size_t it = 1; it <= cfg.max_iter && !converged; ++it) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (sd[j] == 0.0) continue;
      const double* z = Z.data() + j * n;
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += z[i] * r[i];
      rho = rho / N + beta[j];  // columns have unit mean square
      const double updated = detail::soft_threshold(rho, l1) / (1.0 + l2);
      const double delta = updated - beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= delta * z[i];
        beta[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    m.objective_history.push_back(objective());
    m.iterations = it;
    converged = max_change < cfg.tol;
  }
  if (!converged) {
    throw ConvergenceError("coordinate descent did not converge in " +
                           std::to_string(cfg.max_iter) + " sweeps");
  }
  m.w.assign(d, 0.0);
  m.b = ym;
  for (std::size_t j = 0; j < d; ++j) {
    if (sd[j] == 0.0) continue;
    m.w[j] = beta[j] / sd[j];
    m.b -= xm[j] * m.w[j];
  }
  return m;
}

// ---------------------------------------------------------------- features

enum class FeatureSource { Word, NgramMean, Zero };

inline const char* to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::Word: return "word";
    case FeatureSource::NgramMean: return "ngram_mean";
    case FeatureSource::Zero: return "zero";
  }
  return "?";
}

struct WordFeatures {
  Matrix X;
  std::vector<FeatureSource> source;
};

/// The word's own vector when the file has it, else the mean of the vectors
/// of its character n-grams found in the file, else zeros (flagged).
inline WordFeatures word_features(const std::vector<std::string>& words,
                                  const std::filesystem::path& vector_file, std::size_t dim,
                                  const NgramConfig& ngrams = {}) {
  std::unordered_set<std::string> wanted;
  std::vector<std::vector<std::string>> grams(words.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    grams[w] = char_ngrams(words[w], ngrams);
    for (const auto& g : grams[w]) wanted.insert(g);
  }
  std::unordered_map<std::string, std::vector<double>> vecs;
  read_vector_file(vector_file, dim,
                   [&](const std::string& token, std::span<const double> v, std::size_t) {
                     const std::string key = normalize_word(token);
                     if (wanted.count(key) && !vecs.count(key)) {
                       vecs.emplace(key, std::vector<double>(v.begin(), v.end()));
                     }
                   });
  WordFeatures f;
  f.X = Matrix(words.size(), dim);
  for (std::size_t w = 0; w < words.size(); ++w) {
    auto direct = vecs.find(words[w]);
    if (direct != vecs.end()) {
      for (std::size_t j = 0; j < dim; ++j) f.X(w, j) = direct->second[j];
      f.source.push_back(FeatureSource::Word);
      continue;
    }
    std::size_t hits = 0;
    for (std::size_t g = 1; g < grams[w].size(); ++g) {
      auto it = vecs.find(grams[w][g]);
      if (it == vecs.end()) continue;
      for (std::size_t j = 0; j < dim; ++j) f.X(w, j) += it->second[j];
      ++hits;
    }
    if (hits > 0) {
      for (std::size_t j = 0; j < dim; ++j) f.X(w, j) /= static_cast<double>(hits);
      f.source.push_back(FeatureSource::NgramMean);
    } else {
      f.source.push_back(FeatureSource::Zero);
    }
  }
  return f;
}

// ---------------------------------------------------------------- trials

struct BaselineSpec {
  Regularizer kind = Regularizer::ElasticNet;
  double lambda = 1.0;
  double alpha = 0.5;
  std::size_t trials = 10;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t max_iter = 1000;
  double tol = 1e-4;

  std::string label() const {
    std::string s = to_string(kind);
    if (kind == Regularizer::None) return s;
    s += "(lambda=" + format_double(lambda);
    if (kind == Regularizer::ElasticNet) s += ",alpha=" + format_double(alpha);
    return s + ")";
  }
};

struct BaselineTrial {
  std::uint64_t seed = 0;
  double mae = 0.0;
  std::vector<double> pct;
};

struct BaselineResult {
  BaselineSpec spec;
  std::vector<BaselineTrial> trials;
  double mean_mae = 0.0;
  std::vector<double> mean_pct;
};

inline LinearModel fit_baseline(const Matrix& X, const std::vector<double>& y,
                                const BaselineSpec& spec) {
  switch (spec.kind) {
    case Regularizer::None: return fit_ridge(X, y, 0.0);
    case Regularizer::Ridge: return fit_ridge(X, y, spec.lambda);
    case Regularizer::Lasso:
      return fit_coordinate_descent(X, y, {spec.lambda, 1.0, spec.max_iter, spec.tol});
    case Regularizer::ElasticNet:
      return fit_coordinate_descent(X, y, {spec.lambda, spec.alpha, spec.max_iter, spec.tol});
  }
  throw InputError("unknown regularizer");
}

/// Holdout MAE of clipped predictions for `model`.
inline std::pair<double, std::vector<double>> eval_baseline(const LinearModel& model,
                                                            const Matrix& X,
                                                            const std::vector<double>& y) {
  std::vector<double> pred = model.predict(X), errs(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    pred[i] = std::clamp(pred[i], kScaleMin, kScaleMax);
    errs[i] = std::abs(pred[i] - y[i]);
  }
  return {mae(pred, y), percentiles(errs)};
}

/// `trials` independent random holdouts, each with its own derived seed.
inline BaselineResult run_baseline_trials(const Matrix& X, const std::vector<double>& y,
                                          const BaselineSpec& spec) {
  detail::check_design(X, y);
  if (spec.trials < 1) throw InputError("need at least one trial");
  BaselineResult res;
  res.spec = spec;
  res.mean_pct.assign(kReportPercentiles.size(), 0.0);
  for (std::size_t t = 0; t < spec.trials; ++t) {
    const std::uint64_t seed = derive_seed(derive_seed(spec.seed, "baseline"), t);
    Rng rng(seed);
    std::vector<std::size_t> order(X.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    const auto n_hold = static_cast<std::size_t>(
        std::llround(spec.holdout_fraction * static_cast<double>(X.rows)));
    if (n_hold == 0 || n_hold >= X.rows) throw InputError("holdout leaves nothing to fit or test");
    auto take = [&](std::size_t from, std::size_t to, Matrix& Xs, std::vector<double>& ys) {
      Xs = Matrix(to - from, X.cols);
      ys.clear();
      for (std::size_t i = from; i < to; ++i) {
        for (std::size_t j = 0; j < X.cols; ++j) Xs(i - from, j) = X(order[i], j);
        ys.push_back(y[order[i]]);
      }
    };
    Matrix Xtest, Xtrain;
    std::vector<double> ytest, ytrain;
    take(0, n_hold, Xtest, ytest);
    take(n_hold, X.rows, Xtrain, ytrain);
    const auto model = fit_baseline(Xtrain, ytrain, spec);
    auto [m, pct] = eval_baseline(model, Xtest, ytest);
    res.trials.push_back({seed, m, pct});
    res.mean_mae += m / static_cast<double>(spec.trials);
    for (std::size_t i = 0; i < pct.size(); ++i) {
      res.mean_pct[i] += pct[i] / static_cast<double>(spec.trials);
    }
  }
  return res;
}

/// Summary CSV: computed rows, then the published reference rows.
inline std::string baseline_report_csv(const std::vector<BaselineResult>& results,
                                       const std::string& feature_note) {
  std::vector<TableRow> rows;
  for (const auto& r : results) {
    rows.push_back({r.spec.label() + " + " + feature_note, "computed", r.mean_mae, r.mean_pct});
  }
  for (auto& row : published_reference_rows(false)) rows.push_back(std::move(row));
  return table_csv(rows);
}

inline std::string baseline_trials_csv(const std::vector<BaselineResult>& results) {
  std::string out = "model,trial,seed,mae\n";
  for (const auto& r : results) {
    for (std::size_t t = 0; t < r.trials.size(); ++t) {
      out += "\"" + r.spec.label() + "\"," + std::to_string(t) + "," +
             std::to_string(r.trials[t].seed) + "," + format_fixed(r.trials[t].mae) + "\n";
    }
  }
  return out;
}

}  // namespace lexaug
