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

// Dense network core: layers with hand-written backward passes, inverted
// dropout, the n-gram token model, MSE, Adam, and a finite-difference
// gradient checker.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/embed.hpp"
#include "lexaug/tensor.hpp"
#include "lexaug/tokenize.hpp"

namespace lexaug {

enum class Mode { Train, Infer };

/// View of one trainable tensor for optimizers and checkpoints.
template <class T>
struct Param {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
  bool trainable = true;
  /// Row forced to zero and skipped by updates (embedding PAD).
  std::optional<std::size_t> pinned_row;
  /// Set for embeddings: lets the optimizer restrict work to touched rows.
  EmbeddingMatrix<T>* embedding = nullptr;
};

/// Inverted dropout for one forward pass. Train mode draws masks from the
/// stream (or replays recorded ones); kept units are scaled by 1/(1-rate) so
/// Infer mode is the identity.
template <class T>
class Dropout {
 public:
  static Dropout infer() { return Dropout(Mode::Infer, nullptr); }
  static Dropout train(Rng& rng) { return Dropout(Mode::Train, &rng); }
  static Dropout replay(std::vector<Tensor<T>> masks) {
    Dropout d(Mode::Train, nullptr);
    d.replay_ = std::move(masks);
    d.replaying_ = true;
    return d;
  }

  Mode mode() const { return mode_; }

  void apply(Tensor<T>& x, double rate) {
    if (mode_ == Mode::Infer) return;
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw InputError("dropout rate must lie in [0, 1)");
    }
    Tensor<T> mask;
    if (replaying_) {
      if (cursor_ >= replay_.size()) throw ShapeError("dropout replay exhausted");
      mask = replay_[cursor_++];
      if (!mask.same_shape(x)) throw ShapeError("dropout replay shape mismatch");
    } else {
      mask = Tensor<T>(x.shape(), T(1));
      if (rate > 0.0) {
        const T scale = static_cast<T>(1.0 / (1.0 - rate));
        for (auto& m : mask.values()) m = uniform01(*rng_) >= rate ? scale : T(0);
      }
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] *= mask[i];
    recorded_.push_back(std::move(mask));
  }

  const std::vector<Tensor<T>>& recorded() const { return recorded_; }

 private:
  Dropout(Mode mode, Rng* rng) : mode_(mode), rng_(rng) {}

  Mode mode_;
  Rng* rng_;
  bool replaying_ = false;
  std::vector<Tensor<T>> replay_;
  std::size_t cursor_ = 0;
  std::vector<Tensor<T>> recorded_;
};

template <class T>
struct DenseLayer {
  Tensor<T> w, b, gw, gb;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : w(in, out), b(std::vector<std::size_t>{out}), gw(in, out),
        gb(std::vector<std::size_t>{out}) {}

  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }

  /// Glorot-uniform weights, zero bias.
  void init(Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
    for (auto& v : w.values()) v = static_cast<T>(uniform(rng, -limit, limit));
    b.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x) const { return affine(x, w, b); }

  /// Accumulates parameter gradients, returns dL/dx.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy) {
    gemm_tn_acc(x.data(), dy.data(), gw.data(), x.rows(), in_dim(), out_dim());
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      const auto r = dy.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) gb[j] += r[j];
    }
    Tensor<T> dx(x.rows(), in_dim());
    gemm_nt_acc(dy.data(), w.data(), dx.data(), dy.rows(), in_dim(), out_dim());
    return dx;
  }

  void zero_grad() {
    gw.fill(T(0));
    gb.fill(T(0));
  }

  void append_parameters(std::vector<Param<T>>& out, const std::string& prefix,
                         bool trainable = true) {
    out.push_back({prefix + ".w", &w, &gw, trainable, std::nullopt, nullptr});
    out.push_back({prefix + ".b", &b, &gb, trainable, std::nullopt, nullptr});
  }
};

template <class T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.values()) v = v > T(0) ? v : T(0);
}

struct DenseStackConfig {
  std::size_t input_dim = 300;
  std::vector<std::size_t> hidden{128, 64, 32};
  double dropout = 0.5;

  void validate() const {
    if (input_dim == 0) throw InputError("dense stack input_dim must be positive");
    for (auto h : hidden) {
      if (h == 0) throw InputError("dense layer sizes must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw InputError("dropout rate must lie in [0, 1)");
    }
  }
};

/// Dense+ReLU+dropout layers followed by a linear head of width 1.
template <class T>
class DenseStack {
 public:
  struct Cache {
    std::vector<Tensor<T>> inputs;   // input of each dense layer, head last
    std::vector<Tensor<T>> preacts;  // hidden pre-activations
    std::vector<Tensor<T>> masks;    // dropout masks, empty in Infer mode
  };

  DenseStack() = default;
  DenseStack(DenseStackConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::size_t in = cfg_.input_dim;
    for (std::size_t h : cfg_.hidden) {
      hidden_.emplace_back(in, h);
      hidden_.back().init(rng);
      in = h;
    }
    out_ = DenseLayer<T>(in, 1);
    out_.init(rng);
  }

  const DenseStackConfig& config() const { return cfg_; }
  std::vector<DenseLayer<T>>& hidden() { return hidden_; }
  DenseLayer<T>& head() { return out_; }
  const DenseLayer<T>& head() const { return out_; }

  /// x: batch x input_dim. Returns batch x 1.
  Tensor<T> forward(const Tensor<T>& x, Dropout<T>& drop, Cache& cache) const {
    if (x.cols() != cfg_.input_dim) {
      throw ShapeError("dense stack expects input width " +
                       std::to_string(cfg_.input_dim) + ", got " +
                       std::to_string(x.cols()));
    }
    cache = Cache{};
    Tensor<T> h = x;
    for (const auto& layer : hidden_) {
      cache.inputs.push_back(h);
      Tensor<T> z = layer.forward(h);
      h = z;
      cache.preacts.push_back(std::move(z));
      relu_inplace(h);
      const std::size_t before = drop.recorded().size();
      drop.apply(h, cfg_.dropout);
      cache.masks.push_back(drop.recorded().size() > before ? drop.recorded().back()
                                                            : Tensor<T>{});
    }
    cache.inputs.push_back(h);
    return out_.forward(h);
  }

  /// dy: batch x 1. Returns dL/dx.
  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy) {
    Tensor<T> dh = out_.backward(cache.inputs.back(), dy);
    for (std::size_t l = hidden_.size(); l-- > 0;) {
      const Tensor<T>& mask = cache.masks[l];
      const Tensor<T>& z = cache.preacts[l];
      for (std::size_t i = 0; i < dh.size(); ++i) {
        T g = dh[i];
        if (!mask.empty()) g *= mask[i];
        dh[i] = z[i] > T(0) ? g : T(0);
      }
      dh = hidden_[l].backward(cache.inputs[l], dh);
    }
    return dh;
  }

  void zero_grad() {
    for (auto& l : hidden_) l.zero_grad();
    out_.zero_grad();
  }

  void append_parameters(std::vector<Param<T>>& out, const std::string& prefix) {
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
      hidden_[i].append_parameters(out, prefix + "dense" + std::to_string(i));
    }
    out_.append_parameters(out, prefix + "out");
  }

  static void relu_pattern(const Cache& cache, std::vector<bool>& out) {
    for (const auto& z : cache.preacts) {
      for (T v : z.values()) out.push_back(v > T(0));
    }
  }

 private:
  DenseStackConfig cfg_;
  std::vector<DenseLayer<T>> hidden_;
  DenseLayer<T> out_;
};

/// Shared surface of the trainable regressors (token and dictionary models).
template <class M>
concept Regressor = requires(M m, const M cm, std::span<const TokenSequence> batch,
                             Dropout<typename M::Scalar>& drop,
                             typename M::Cache& cache,
                             std::span<const typename M::Scalar> dpred) {
  { cm.forward(batch, drop, cache) } -> std::same_as<std::vector<typename M::Scalar>>;
  m.backward(cache, dpred);
  m.zero_grad();
  { m.parameters() } -> std::same_as<std::vector<Param<typename M::Scalar>>>;
  m.touch();
  { cm.generation() } -> std::convertible_to<std::uint64_t>;
  { cm.relu_pattern(cache) } -> std::same_as<std::vector<bool>>;
};

struct TokenModelConfig {
  std::size_t vocab_size = 2;
  std::size_t embed_dim = 300;
  std::vector<std::size_t> hidden{128, 64, 32};
  double dropout = 0.5;
  bool freeze_embeddings = false;
};

/// n-gram ids -> embedding rows -> masked mean -> dense stack -> score.
template <class T>
class TokenModel {
 public:
  using Scalar = T;

  struct Cache {
    std::uint64_t generation = 0;
    bool valid = false;
    std::vector<TokenSequence> inputs;
    std::vector<std::size_t> counts;
    typename DenseStack<T>::Cache head;
  };

  TokenModel() = default;

  /// Random embeddings in U(-0.05, 0.05).
  TokenModel(const TokenModelConfig& cfg, std::uint64_t seed)
      : TokenModel(cfg, random_embedding(cfg, seed), seed) {}

  TokenModel(const TokenModelConfig& cfg, EmbeddingMatrix<T> embedding,
             std::uint64_t seed)
      : cfg_(cfg), emb_(std::move(embedding)) {
    if (emb_.vocab_size() != cfg_.vocab_size || emb_.dim() != cfg_.embed_dim) {
      throw ShapeError("embedding matrix does not match model config");
    }
    emb_.trainable = !cfg_.freeze_embeddings;
    Rng rng(derive_seed(seed, "dense"));
    head_ = DenseStack<T>({cfg_.embed_dim, cfg_.hidden, cfg_.dropout}, rng);
  }

  const TokenModelConfig& config() const { return cfg_; }
  EmbeddingMatrix<T>& embedding() { return emb_; }
  const EmbeddingMatrix<T>& embedding() const { return emb_; }
  DenseStack<T>& head() { return head_; }
  std::uint64_t generation() const { return generation_; }
  void touch() { ++generation_; }

  std::vector<T> forward(std::span<const TokenSequence> batch, Dropout<T>& drop,
                         Cache& cache) const {
    if (batch.empty()) throw ShapeError("empty batch");
    const std::size_t d = cfg_.embed_dim;
    Tensor<T> pooled(batch.size(), d);
    cache.inputs.assign(batch.begin(), batch.end());
    cache.counts.assign(batch.size(), 0);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& seq = batch[b];
      if (seq.mask.size() != seq.ids.size()) throw ShapeError("mask/ids length mismatch");
      auto out = pooled.row(b);
      std::size_t n = 0;
      for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        if (!seq.mask[i]) continue;
        const auto id = static_cast<std::size_t>(seq.ids[i]);
        if (seq.ids[i] < 0 || id >= emb_.vocab_size()) {
          throw ShapeError("token id " + std::to_string(seq.ids[i]) +
                           " outside vocabulary of size " +
                           std::to_string(emb_.vocab_size()));
        }
        const auto row = emb_.weights.row(id);
        for (std::size_t j = 0; j < d; ++j) out[j] += row[j];
        ++n;
      }
      if (n == 0) throw InputError("token sequence has no real tokens");
      const T inv = T(1) / static_cast<T>(n);
      for (auto& v : out) v *= inv;
      cache.counts[b] = n;
    }
    const Tensor<T> y = head_.forward(pooled, drop, cache.head);
    cache.generation = generation_;
    cache.valid = true;
    return {y.values().begin(), y.values().end()};
  }

  std::vector<T> predict(std::span<const TokenSequence> batch) const {
    auto drop = Dropout<T>::infer();
    Cache cache;
    return forward(batch, drop, cache);
  }

  void backward(const Cache& cache, std::span<const T> dpred) {
    if (!cache.valid || cache.generation != generation_) {
      throw Error("stale forward cache: parameters changed since forward()");
    }
    if (dpred.size() != cache.inputs.size()) {
      throw ShapeError("gradient length does not match batch");
    }
    Tensor<T> dy(dpred.size(), 1);
    std::copy(dpred.begin(), dpred.end(), dy.data());
    const Tensor<T> dpooled = head_.backward(cache.head, dy);
    if (!emb_.trainable) return;
    for (std::size_t b = 0; b < cache.inputs.size(); ++b) {
      const auto& seq = cache.inputs[b];
      const T scale = T(1) / static_cast<T>(cache.counts[b]);
      const auto g = dpooled.row(b);
      for (std::size_t i = 0; i < seq.ids.size(); ++i) {
        if (!seq.mask[i] || seq.ids[i] == emb_.pad_id) continue;
        emb_.accumulate(static_cast<std::size_t>(seq.ids[i]), g, scale);
      }
    }
  }

  void zero_grad() {
    emb_.zero_grad();
    head_.zero_grad();
  }

  std::vector<Param<T>> parameters() {
    std::vector<Param<T>> out;
    out.push_back({"embedding", &emb_.weights, &emb_.grad, emb_.trainable,
                   static_cast<std::size_t>(emb_.pad_id), &emb_});
    head_.append_parameters(out, "");
    return out;
  }

  std::vector<bool> relu_pattern(const Cache& cache) const {
    std::vector<bool> out;
    DenseStack<T>::relu_pattern(cache.head, out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.value->size();
    return n;
  }

 private:
  static EmbeddingMatrix<T> random_embedding(const TokenModelConfig& cfg,
                                             std::uint64_t seed) {
    EmbeddingMatrix<T> emb(cfg.vocab_size, cfg.embed_dim);
    Rng rng(derive_seed(seed, "embedding"));
    emb.randomize(rng, kOovInitRange);
    return emb;
  }

  TokenModelConfig cfg_;
  EmbeddingMatrix<T> emb_;
  DenseStack<T> head_;
  std::uint64_t generation_ = 0;
};

// ---------------------------------------------------------------- loss

template <class P, class Q>
double mse_loss(std::span<const P> pred, std::span<const Q> target) {
  if (pred.empty() || pred.size() != target.size()) {
    throw InputError("mse_loss: inputs must be nonempty and equal length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    s += d * d;
  }
  return s / static_cast<double>(pred.size());
}

inline double mse_loss(const std::vector<double>& pred,
                       const std::vector<double>& target) {
  return mse_loss(std::span<const double>(pred), std::span<const double>(target));
}

/// dL/dpred of the mean squared error.
template <class T, class Q>
std::vector<T> mse_grad(std::span<const T> pred, std::span<const Q> target) {
  std::vector<T> g(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    g[i] = static_cast<T>(scale * (static_cast<double>(pred[i]) -
                                   static_cast<double>(target[i])));
  }
  return g;
}

// ---------------------------------------------------------------- Adam

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Update only embedding rows that received gradient this step.
  bool sparse_embeddings = false;
};

/// Moment accumulators for one parameter tensor.
template <class T>
struct AdamMoments {
  std::vector<T> m, v;
};

/// Bias-corrected Adam on one element range; `t` is the 1-based step.
template <class T>
void adam_update(std::span<T> theta, std::span<const T> grad, AdamMoments<T>& st,
                 std::size_t offset, long t, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    double m = cfg.beta1 * static_cast<double>(st.m[offset + i]) + (1.0 - cfg.beta1) * g;
    double v = cfg.beta2 * static_cast<double>(st.v[offset + i]) + (1.0 - cfg.beta2) * g * g;
    st.m[offset + i] = static_cast<T>(m);
    st.v[offset + i] = static_cast<T>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                              cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }
  const std::vector<AdamMoments<T>>& moments() const { return state_; }

  void step(const std::vector<Param<T>>& params) {
    if (state_.empty()) {
      state_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        state_[i].m.assign(params[i].value->size(), T(0));
        state_[i].v.assign(params[i].value->size(), T(0));
      }
    }
    if (state_.size() != params.size()) {
      throw ShapeError("Adam: parameter list changed between steps");
    }
    ++t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (p.value->size() != state_[i].m.size() || !p.value->same_shape(*p.grad)) {
        throw ShapeError("Adam: shape mismatch for " + p.name);
      }
      if (!p.trainable) continue;
      const std::size_t cols = p.value->cols();
      auto update_row = [&](std::size_t r) {
        if (p.pinned_row && *p.pinned_row == r) return;
        adam_update(p.value->row(r), std::span<const T>(p.grad->row(r)), state_[i],
                    r * cols, t_, cfg_);
      };
      if (p.embedding && cfg_.sparse_embeddings) {
        for (std::size_t r : p.embedding->touched) update_row(r);
      } else {
        for (std::size_t r = 0; r < p.value->rows(); ++r) update_row(r);
      }
    }
  }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<AdamMoments<T>> state_;
};

/// One optimizer step; invalidates outstanding forward caches.
template <Regressor M>
void apply_step(M& model, Adam<typename M::Scalar>& opt) {
  opt.step(model.parameters());
  model.touch();
}

// ---------------------------------------------------------------- checks

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  /// Coordinates whose +/-h probes flipped a ReLU; finite differences are
  /// meaningless across a kink so these are excluded.
  std::size_t kink_skipped = 0;
  double tolerance = 0.0;
  std::vector<std::pair<std::string, double>> per_param;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Denominator floors of the relative error. Near-zero gradients are
/// compared absolutely (error / floor): a central difference at h = 1e-6
/// carries about |dL/dp| * ulp(p) * 10 / h of rounding noise, which reaches
/// 1e-8 for the dense model and 3e-8 through layer norms and softmax (key
/// biases, whose exact gradient is zero, show it most clearly).
inline constexpr double kGradCheckFloor = 1e-4;
inline constexpr double kEncoderGradCheckFloor = 1e-3;

/// Compares backward() against central differences of the MSE loss on
/// `batch`. Train mode records one set of dropout masks and replays it for
/// every probe.
template <Regressor M>
GradCheckReport grad_check(M& model, std::span<const TokenSequence> batch,
                           std::span<const double> targets, double tolerance,
                           Mode mode = Mode::Infer, std::uint64_t seed = 1,
                           double h = 1e-6, double floor = kGradCheckFloor) {
  static_assert(std::is_same_v<typename M::Scalar, double>,
                "gradient checks run in double precision");
  Rng rng(seed);
  auto first = mode == Mode::Train ? Dropout<double>::train(rng)
                                   : Dropout<double>::infer();
  typename M::Cache cache;
  model.zero_grad();
  const auto pred = model.forward(batch, first, cache);
  const auto masks = first.recorded();
  const auto base_pattern = model.relu_pattern(cache);
  const auto dpred = mse_grad(std::span<const double>(pred), targets);
  model.backward(cache, std::span<const double>(dpred));

  auto predict_at = [&](std::vector<bool>& pattern) {
    auto drop = mode == Mode::Train ? Dropout<double>::replay(masks)
                                    : Dropout<double>::infer();
    typename M::Cache c;
    auto p = model.forward(batch, drop, c);
    pattern = model.relu_pattern(c);
    return p;
  };
  // L(+) - L(-) expanded per sample as (p+ - p-)(p+ + p- - 2t) / N, which
  // avoids cancelling two loss values that are large next to their gap.
  auto loss_gap = [&](const std::vector<double>& plus,
                      const std::vector<double>& minus) {
    double s = 0.0;
    for (std::size_t i = 0; i < plus.size(); ++i) {
      s += (plus[i] - minus[i]) * (plus[i] + minus[i] - 2.0 * targets[i]);
    }
    return s / static_cast<double>(plus.size());
  };

  GradCheckReport report;
  report.tolerance = tolerance;
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    double worst = 0.0;
    const std::size_t cols = p.value->cols();
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      if (p.pinned_row && i / cols == *p.pinned_row) continue;
      const double saved = (*p.value)[i];
      std::vector<bool> pat_plus, pat_minus;
      (*p.value)[i] = saved + h;
      const auto pp = predict_at(pat_plus);
      (*p.value)[i] = saved - h;
      const auto pm = predict_at(pat_minus);
      (*p.value)[i] = saved;
      if (pat_plus != base_pattern || pat_minus != base_pattern) {
        ++report.kink_skipped;
        continue;
      }
      const double numeric = loss_gap(pp, pm) / (2.0 * h);
      const double analytic = (*p.grad)[i];
      const double denom =
          std::max({std::abs(numeric), std::abs(analytic), floor});
      const double rel = std::abs(numeric - analytic) / denom;
      worst = std::max(worst, rel);
      ++report.checked;
    }
    report.per_param.emplace_back(p.name, worst);
    if (worst >= report.max_rel_error) {
      report.max_rel_error = worst;
      report.worst_param = p.name;
    }
  }
  model.zero_grad();
  return report;
}

}  // namespace lexaug
