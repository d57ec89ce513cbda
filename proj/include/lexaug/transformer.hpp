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

// Small post-LN Transformer encoder (BERT layout) with class-token pooling
// and the dense regression head, for the dictionary model.
//
// Real tokens form a prefix of every sequence. Padding positions are never
// used as keys, so each real position's output is independent of how much
// padding follows it.

#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/nn.hpp"
#include "lexaug/tensor.hpp"
#include "lexaug/tokenize.hpp"

namespace lexaug {

struct EncoderConfig {
  std::size_t vocab_size = 2;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t model_dim = 64;
  std::size_t ff_dim = 256;
  std::size_t max_seq_len = 128;
  double dropout = 0.1;
  bool positional = true;

  std::size_t head_dim() const { return model_dim / heads; }

  void validate() const {
    if (layers < 1) throw InputError("encoder needs at least one layer");
    if (heads < 1 || model_dim % heads != 0) {
      throw InputError("model_dim must be divisible by heads");
    }
    if (vocab_size < 1 || ff_dim < 1 || max_seq_len < 1) {
      throw InputError("encoder dimensions must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw InputError("dropout rate must lie in [0, 1)");
    }
  }
};

inline constexpr double kLayerNormEps = 1e-12;

template <class T>
struct LayerNorm {
  Tensor<T> gamma, beta, ggamma, gbeta;

  struct Cache {
    Tensor<T> xhat;
    std::vector<T> rstd;
  };

  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim)
      : gamma(std::vector<std::size_t>{dim}, T(1)),
        beta(std::vector<std::size_t>{dim}),
        ggamma(std::vector<std::size_t>{dim}),
        gbeta(std::vector<std::size_t>{dim}) {}

  /// Per-row standardisation before the affine rescale.
  static Tensor<T> normalize(const Tensor<T>& x, std::vector<T>& rstd) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor<T> xhat(n, d);
    rstd.assign(n, T(0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = x.row(i);
      T mu = 0;
      for (T v : r) mu += v;
      mu /= static_cast<T>(d);
      T var = 0;
      for (T v : r) var += (v - mu) * (v - mu);
      var /= static_cast<T>(d);
      const T rs = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      rstd[i] = rs;
      auto o = xhat.row(i);
      for (std::size_t j = 0; j < d; ++j) o[j] = (r[j] - mu) * rs;
    }
    return xhat;
  }

  Tensor<T> forward(const Tensor<T>& x, Cache& cache) const {
    cache.xhat = normalize(x, cache.rstd);
    Tensor<T> y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto h = cache.xhat.row(i);
      auto o = y.row(i);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] = gamma[j] * h[j] + beta[j];
    }
    return y;
  }

  Tensor<T> backward(const Cache& cache, const Tensor<T>& dy, bool accumulate) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Tensor<T> dx(n, d);
    std::vector<T> dxhat(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto g = dy.row(i);
      const auto h = cache.xhat.row(i);
      T mean_dxhat = 0, mean_dxhat_xhat = 0;
      for (std::size_t j = 0; j < d; ++j) {
        if (accumulate) {
          ggamma[j] += g[j] * h[j];
          gbeta[j] += g[j];
        }
        dxhat[j] = g[j] * gamma[j];
        mean_dxhat += dxhat[j];
        mean_dxhat_xhat += dxhat[j] * h[j];
      }
      mean_dxhat /= static_cast<T>(d);
      mean_dxhat_xhat /= static_cast<T>(d);
      auto o = dx.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        o[j] = cache.rstd[i] * (dxhat[j] - mean_dxhat - h[j] * mean_dxhat_xhat);
      }
    }
    return dx;
  }

  void zero_grad() {
    ggamma.fill(T(0));
    gbeta.fill(T(0));
  }
};

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

template <class T>
T gelu(T x) {
  const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <class T>
T gelu_grad(T x) {
  const T u = static_cast<T>(kGeluC) * (x + T(0.044715) * x * x * x);
  const T t = std::tanh(u);
  const T du = static_cast<T>(kGeluC) * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

template <class T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace detail

/// Multi-head self-attention, feed-forward, two post-residual layer norms.
template <class T>
struct EncoderLayer {
  DenseLayer<T> q, k, v, o, ff1, ff2;
  LayerNorm<T> ln1, ln2;

  struct Cache {
    Tensor<T> x_in, Q, K, V, A, attn_mask, x1, F1, G, ff_mask;
    std::vector<Tensor<T>> probs;  // per head: rows x valid
    typename LayerNorm<T>::Cache ln1c, ln2c;
  };

  EncoderLayer() = default;
  EncoderLayer(const EncoderConfig& cfg, Rng& rng)
      : q(cfg.model_dim, cfg.model_dim), k(cfg.model_dim, cfg.model_dim),
        v(cfg.model_dim, cfg.model_dim), o(cfg.model_dim, cfg.model_dim),
        ff1(cfg.model_dim, cfg.ff_dim), ff2(cfg.ff_dim, cfg.model_dim),
        ln1(cfg.model_dim), ln2(cfg.model_dim) {
    for (auto* l : {&q, &k, &v, &o, &ff1, &ff2}) l->init(rng);
  }

  /// x: rows x d_m; keys are the first `valid` rows.
  Tensor<T> forward(const Tensor<T>& x, std::size_t valid, const EncoderConfig& cfg,
                    Dropout<T>& drop, Cache& c) const {
    const std::size_t n = x.rows(), d = cfg.model_dim, H = cfg.heads,
                      dk = cfg.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));
    c.x_in = x;
    c.Q = q.forward(x);
    c.K = k.forward(x);
    c.V = v.forward(x);
    c.A = Tensor<T>(n, d);
    c.probs.assign(H, Tensor<T>{});
    std::vector<T> s(valid);
    for (std::size_t h = 0; h < H; ++h) {
      Tensor<T> P(n, valid);
      const std::size_t off = h * dk;
      for (std::size_t i = 0; i < n; ++i) {
        const T* qi = c.Q.data() + i * d + off;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < valid; ++j) {
          const T* kj = c.K.data() + j * d + off;
          T dot = 0;
          for (std::size_t t = 0; t < dk; ++t) dot += qi[t] * kj[t];
          s[j] = dot * scale;
          mx = std::max(mx, s[j]);
        }
        T sum = 0;
        for (std::size_t j = 0; j < valid; ++j) {
          s[j] = std::exp(s[j] - mx);
          sum += s[j];
        }
        T* ai = c.A.data() + i * d + off;
        for (std::size_t j = 0; j < valid; ++j) {
          const T p = s[j] / sum;
          P(i, j) = p;
          const T* vj = c.V.data() + j * d + off;
          for (std::size_t t = 0; t < dk; ++t) ai[t] += p * vj[t];
        }
      }
      c.probs[h] = std::move(P);
    }
    Tensor<T> out = o.forward(c.A);
    const std::size_t before = drop.recorded().size();
    drop.apply(out, cfg.dropout);
    c.attn_mask = drop.recorded().size() > before ? drop.recorded().back() : Tensor<T>{};
    c.x1 = ln1.forward(detail::add(x, out), c.ln1c);
    c.F1 = ff1.forward(c.x1);
    c.G = c.F1;
    for (auto& val : c.G.values()) val = detail::gelu(val);
    Tensor<T> f2 = ff2.forward(c.G);
    const std::size_t before2 = drop.recorded().size();
    drop.apply(f2, cfg.dropout);
    c.ff_mask = drop.recorded().size() > before2 ? drop.recorded().back() : Tensor<T>{};
    return ln2.forward(detail::add(c.x1, f2), c.ln2c);
  }

  Tensor<T> backward(const Cache& c, const Tensor<T>& dy, std::size_t valid,
                     const EncoderConfig& cfg) {
    const std::size_t n = dy.rows(), d = cfg.model_dim, H = cfg.heads,
                      dk = cfg.head_dim();
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));
    // x2 = LN2(x1 + drop(FF(x1)))
    Tensor<T> dr2 = ln2.backward(c.ln2c, dy, true);
    Tensor<T> df2 = dr2;
    if (!c.ff_mask.empty()) {
      for (std::size_t i = 0; i < df2.size(); ++i) df2[i] *= c.ff_mask[i];
    }
    Tensor<T> dG = ff2.backward(c.G, df2);
    for (std::size_t i = 0; i < dG.size(); ++i) dG[i] *= detail::gelu_grad(c.F1[i]);
    Tensor<T> dx1 = ff1.backward(c.x1, dG);
    detail::add_inplace(dx1, dr2);
    // x1 = LN1(x + drop(MHA(x)))
    Tensor<T> dr1 = ln1.backward(c.ln1c, dx1, true);
    Tensor<T> dout = dr1;
    if (!c.attn_mask.empty()) {
      for (std::size_t i = 0; i < dout.size(); ++i) dout[i] *= c.attn_mask[i];
    }
    Tensor<T> dA = o.backward(c.A, dout);
    Tensor<T> dQ(n, d), dK(n, d), dV(n, d);
    std::vector<T> dP(valid);
    for (std::size_t h = 0; h < H; ++h) {
      const Tensor<T>& P = c.probs[h];
      const std::size_t off = h * dk;
      for (std::size_t i = 0; i < n; ++i) {
        const T* dai = dA.data() + i * d + off;
        T dot_pdp = 0;
        for (std::size_t j = 0; j < valid; ++j) {
          const T* vj = c.V.data() + j * d + off;
          T acc = 0;
          for (std::size_t t = 0; t < dk; ++t) acc += dai[t] * vj[t];
          dP[j] = acc;
          dot_pdp += P(i, j) * acc;
          T* dvj = dV.data() + j * d + off;
          const T p = P(i, j);
          for (std::size_t t = 0; t < dk; ++t) dvj[t] += p * dai[t];
        }
        const T* qi = c.Q.data() + i * d + off;
        T* dqi = dQ.data() + i * d + off;
        for (std::size_t j = 0; j < valid; ++j) {
          const T ds = P(i, j) * (dP[j] - dot_pdp) * scale;
          const T* kj = c.K.data() + j * d + off;
          T* dkj = dK.data() + j * d + off;
          for (std::size_t t = 0; t < dk; ++t) {
            dqi[t] += ds * kj[t];
            dkj[t] += ds * qi[t];
          }
        }
      }
    }
    Tensor<T> dx = dr1;
    detail::add_inplace(dx, q.backward(c.x_in, dQ));
    detail::add_inplace(dx, k.backward(c.x_in, dK));
    detail::add_inplace(dx, v.backward(c.x_in, dV));
    return dx;
  }

  void zero_grad() {
    for (auto* l : {&q, &k, &v, &o, &ff1, &ff2}) l->zero_grad();
    ln1.zero_grad();
    ln2.zero_grad();
  }

  void append_parameters(std::vector<Param<T>>& out, const std::string& prefix,
                         bool trainable) {
    q.append_parameters(out, prefix + "q", trainable);
    k.append_parameters(out, prefix + "k", trainable);
    v.append_parameters(out, prefix + "v", trainable);
    o.append_parameters(out, prefix + "o", trainable);
    out.push_back({prefix + "ln1.gamma", &ln1.gamma, &ln1.ggamma, trainable, std::nullopt, nullptr});
    out.push_back({prefix + "ln1.beta", &ln1.beta, &ln1.gbeta, trainable, std::nullopt, nullptr});
    ff1.append_parameters(out, prefix + "ff1", trainable);
    ff2.append_parameters(out, prefix + "ff2", trainable);
    out.push_back({prefix + "ln2.gamma", &ln2.gamma, &ln2.ggamma, trainable, std::nullopt, nullptr});
    out.push_back({prefix + "ln2.beta", &ln2.beta, &ln2.gbeta, trainable, std::nullopt, nullptr});
  }
};

/// Contextual output of one sequence plus the attention weights of every
/// layer and head (rows x seq_len, zero on padding columns).
template <class T>
struct EncoderOutput {
  Tensor<T> hidden;
  std::vector<std::vector<Tensor<T>>> attention;
};

struct DictionaryModelConfig {
  EncoderConfig encoder;
  std::vector<std::size_t> hidden{128, 64, 32};
  double head_dropout = 0.5;
  bool freeze_encoder = false;
};

template <class T>
class DictionaryModel {
 public:
  using Scalar = T;

  struct SequenceCache {
    std::vector<TokenId> ids;
    std::size_t rows = 0, valid = 0;
    typename LayerNorm<T>::Cache emb_ln;
    Tensor<T> emb_mask;
    std::vector<typename EncoderLayer<T>::Cache> layers;
  };

  struct Cache {
    std::uint64_t generation = 0;
    bool valid = false;
    std::vector<SequenceCache> seqs;
    typename DenseStack<T>::Cache head;
  };

  DictionaryModel() = default;

  DictionaryModel(const DictionaryModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.encoder.validate();
    const auto& e = cfg_.encoder;
    Rng rng(derive_seed(seed, "encoder"));
    tok_ = EmbeddingMatrix<T>(e.vocab_size, e.model_dim);
    for (auto& v : tok_.weights.values()) v = static_cast<T>(0.02 * gaussian(rng));
    tok_.pin_pad_row();
    tok_.trainable = !cfg_.freeze_encoder;
    pos_ = Tensor<T>(e.max_seq_len, e.model_dim);
    pos_grad_ = Tensor<T>(e.max_seq_len, e.model_dim);
    for (auto& v : pos_.values()) v = static_cast<T>(0.02 * gaussian(rng));
    emb_ln_ = LayerNorm<T>(e.model_dim);
    for (std::size_t l = 0; l < e.layers; ++l) layers_.emplace_back(e, rng);
    Rng head_rng(derive_seed(seed, "dense"));
    head_ = DenseStack<T>({e.model_dim, cfg_.hidden, cfg_.head_dropout}, head_rng);
  }

  const DictionaryModelConfig& config() const { return cfg_; }
  std::uint64_t generation() const { return generation_; }
  void touch() { ++generation_; }
  DenseStack<T>& head() { return head_; }
  EmbeddingMatrix<T>& token_embedding() { return tok_; }
  Tensor<T>& positional_embedding() { return pos_; }
  std::vector<EncoderLayer<T>>& layers() { return layers_; }

  /// Full contextual matrix (padding rows included) in the given mode.
  EncoderOutput<T> encode(const TokenSequence& seq, Dropout<T>& drop) const {
    SequenceCache sc;
    EncoderOutput<T> out;
    out.hidden = encode_sequence(seq, drop, sc, /*all_rows=*/true);
    for (const auto& lc : sc.layers) {
      std::vector<Tensor<T>> heads;
      for (const auto& p : lc.probs) {
        Tensor<T> full(p.rows(), seq.size());
        for (std::size_t i = 0; i < p.rows(); ++i) {
          for (std::size_t j = 0; j < p.cols(); ++j) full(i, j) = p(i, j);
        }
        heads.push_back(std::move(full));
      }
      out.attention.push_back(std::move(heads));
    }
    return out;
  }

  EncoderOutput<T> encode(const TokenSequence& seq) const {
    auto drop = Dropout<T>::infer();
    return encode(seq, drop);
  }

  /// Class-token pooling followed by the dense head.
  std::vector<T> forward(std::span<const TokenSequence> batch, Dropout<T>& drop,
                         Cache& cache) const {
    if (batch.empty()) throw ShapeError("empty batch");
    const std::size_t d = cfg_.encoder.model_dim;
    Tensor<T> pooled(batch.size(), d);
    cache.seqs.assign(batch.size(), SequenceCache{});
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Tensor<T> h = encode_sequence(batch[b], drop, cache.seqs[b], false);
      const auto r = h.row(0);
      std::copy(r.begin(), r.end(), pooled.row(b).begin());
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
    if (dpred.size() != cache.seqs.size()) {
      throw ShapeError("gradient length does not match batch");
    }
    Tensor<T> dy(dpred.size(), 1);
    std::copy(dpred.begin(), dpred.end(), dy.data());
    const Tensor<T> dpooled = head_.backward(cache.head, dy);
    if (cfg_.freeze_encoder) return;
    const auto& e = cfg_.encoder;
    for (std::size_t b = 0; b < cache.seqs.size(); ++b) {
      const SequenceCache& sc = cache.seqs[b];
      Tensor<T> dx(sc.rows, e.model_dim);
      const auto g = dpooled.row(b);
      std::copy(g.begin(), g.end(), dx.row(0).begin());
      for (std::size_t l = layers_.size(); l-- > 0;) {
        dx = layers_[l].backward(sc.layers[l], dx, sc.valid, e);
      }
      if (!sc.emb_mask.empty()) {
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= sc.emb_mask[i];
      }
      const Tensor<T> de = emb_ln_.backward(sc.emb_ln, dx, true);
      for (std::size_t i = 0; i < sc.rows; ++i) {
        const auto row = de.row(i);
        if (sc.ids[i] != tok_.pad_id) {
          tok_.accumulate(static_cast<std::size_t>(sc.ids[i]), row, T(1));
        }
        if (e.positional) {
          auto pg = pos_grad_.row(i);
          for (std::size_t j = 0; j < row.size(); ++j) pg[j] += row[j];
        }
      }
    }
  }

  void zero_grad() {
    tok_.zero_grad();
    pos_grad_.fill(T(0));
    emb_ln_.zero_grad();
    for (auto& l : layers_) l.zero_grad();
    head_.zero_grad();
  }

  std::vector<Param<T>> parameters() {
    const bool train_enc = !cfg_.freeze_encoder;
    std::vector<Param<T>> out;
    out.push_back({"tok_embedding", &tok_.weights, &tok_.grad, train_enc,
                   static_cast<std::size_t>(tok_.pad_id), &tok_});
    out.push_back({"pos_embedding", &pos_, &pos_grad_,
                   train_enc && cfg_.encoder.positional, std::nullopt, nullptr});
    out.push_back({"emb_ln.gamma", &emb_ln_.gamma, &emb_ln_.ggamma, train_enc, std::nullopt, nullptr});
    out.push_back({"emb_ln.beta", &emb_ln_.beta, &emb_ln_.gbeta, train_enc, std::nullopt, nullptr});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      layers_[l].append_parameters(out, "layer" + std::to_string(l) + ".", train_enc);
    }
    head_.append_parameters(out, "head.");
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
  static double gaussian(Rng& rng) {
    // Box-Muller on the portable uniform source.
    const double u1 = 1.0 - uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  Tensor<T> encode_sequence(const TokenSequence& seq, Dropout<T>& drop,
                            SequenceCache& sc, bool all_rows) const {
    const auto& e = cfg_.encoder;
    if (seq.ids.size() != seq.mask.size()) throw ShapeError("mask/ids length mismatch");
    if (seq.size() > e.max_seq_len) {
      throw InputError("sequence length " + std::to_string(seq.size()) +
                       " exceeds encoder maximum " + std::to_string(e.max_seq_len));
    }
    const std::size_t valid = seq.valid_length();
    for (std::size_t i = valid; i < seq.mask.size(); ++i) {
      if (seq.mask[i]) throw InputError("token mask is not a prefix");
    }
    if (valid == 0) throw InputError("token sequence has no real tokens");
    sc.valid = valid;
    sc.rows = all_rows ? seq.size() : valid;
    sc.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(sc.rows));
    Tensor<T> x(sc.rows, e.model_dim);
    for (std::size_t i = 0; i < sc.rows; ++i) {
      const TokenId id = sc.ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= tok_.vocab_size()) {
        throw ShapeError("token id " + std::to_string(id) + " outside vocabulary");
      }
      const auto t = tok_.weights.row(static_cast<std::size_t>(id));
      auto r = x.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = t[j];
      if (e.positional) {
        const auto p = pos_.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += p[j];
      }
    }
    x = emb_ln_.forward(x, sc.emb_ln);
    const std::size_t before = drop.recorded().size();
    drop.apply(x, e.dropout);
    sc.emb_mask = drop.recorded().size() > before ? drop.recorded().back() : Tensor<T>{};
    sc.layers.assign(layers_.size(), typename EncoderLayer<T>::Cache{});
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      x = layers_[l].forward(x, valid, e, drop, sc.layers[l]);
    }
    return x;
  }

  DictionaryModelConfig cfg_;
  EmbeddingMatrix<T> tok_;
  Tensor<T> pos_, pos_grad_;
  LayerNorm<T> emb_ln_;
  std::vector<EncoderLayer<T>> layers_;
  DenseStack<T> head_;
  std::uint64_t generation_ = 0;
};

}  // namespace lexaug
