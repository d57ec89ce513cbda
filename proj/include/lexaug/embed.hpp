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

// Token vocabulary, trainable embedding matrix, text vector files and
// masked mean pooling.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lexaug/common.hpp"
#include "lexaug/lexicon.hpp"
#include "lexaug/tensor.hpp"
#include "lexaug/tokenize.hpp"

namespace lexaug {

/// Dense token ids with PAD = 0 and UNK = 1; other tokens numbered in
/// order of first occurrence.
class TokenVocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr const char* kPadToken = "<pad>";
  static constexpr const char* kUnkToken = "<unk>";

  TokenVocab() : TokenVocab(std::vector<std::string>{kPadToken, kUnkToken}) {}

  /// From a saved token list (line order = id).
  explicit TokenVocab(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {
    if (tokens_.size() < 2 || tokens_[0] != kPadToken ||
        tokens_[1] != kUnkToken) {
      throw InputError("token vocabulary must start with <pad>, <unk>");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw InputError("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  TokenId add(const std::string& token) {
    const auto [it, fresh] =
        index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    if (fresh) tokens_.push_back(token);
    return it->second;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::unordered_map<std::string, TokenId>& index() const { return index_; }
  TokenId id_of(const std::string& t) const {
    const auto it = index_.find(t);
    return it == index_.end() ? kUnk : it->second;
  }
  bool contains(const std::string& t) const { return index_.count(t) != 0; }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a("token");
    for (const auto& t : tokens_) h = fnv1a(t + "\n", h);
    return h;
  }

  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out += '\n';
    }
    return out;
  }

  static TokenVocab load(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return TokenVocab(std::move(lines));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

inline TokenVocab build_vocab(
    const std::vector<std::vector<std::string>>& token_lists) {
  TokenVocab vocab;
  std::size_t seen = 0;
  for (const auto& list : token_lists) {
    for (const auto& t : list) {
      vocab.add(t);
      ++seen;
    }
  }
  if (seen == 0) throw InputError("build_vocab: empty corpus");
  return vocab;
}

/// V x d weights. The pad row is all-zero and never updated.
template <class T>
struct EmbeddingMatrix {
  Tensor<T> weights;
  Tensor<T> grad;
  bool trainable = true;
  TokenId pad_id = kPadId;
  /// Rows with nonzero gradient since the last zero_grad(), in first-touch
  /// order; consumed by sparse optimizer updates.
  std::vector<std::size_t> touched;
  std::vector<bool> touched_flag;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t vocab_size, std::size_t dim)
      : weights(vocab_size, dim), grad(vocab_size, dim),
        touched_flag(vocab_size, false) {}

  std::size_t vocab_size() const { return weights.rows(); }
  std::size_t dim() const { return weights.cols(); }

  void zero_grad() {
    for (std::size_t r : touched) {
      auto g = grad.row(r);
      std::fill(g.begin(), g.end(), T(0));
      touched_flag[r] = false;
    }
    touched.clear();
  }

  void accumulate(std::size_t row, std::span<const T> g, T scale) {
    if (!touched_flag[row]) {
      touched_flag[row] = true;
      touched.push_back(row);
    }
    auto dst = grad.row(row);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * g[j];
  }

  void pin_pad_row() {
    auto r = weights.row(static_cast<std::size_t>(pad_id));
    std::fill(r.begin(), r.end(), T(0));
  }

  void randomize(Rng& rng, double range) {
    for (auto& v : weights.values()) v = static_cast<T>(uniform(rng, -range, range));
    pin_pad_row();
  }
};

inline constexpr double kOovInitRange = 0.05;

/// Reads "<count> <dim>" then "<token> <dim floats>" lines, calling
/// `visit(token, values, line)` for each row. Throws on dimension mismatch
/// or non-finite values.
template <class Visit>
void read_vector_file(const std::filesystem::path& path, std::size_t dim,
                      Visit&& visit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("input not found: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty vector file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto head = split_whitespace(line);
  long long count = 0, file_dim = 0;
  if (head.size() != 2 || !parse_int(head[0], count) ||
      !parse_int(head[1], file_dim) || count < 0 || file_dim < 1) {
    throw ParseError(1, "expected '<count> <dim>' header");
  }
  if (static_cast<std::size_t>(file_dim) != dim) {
    throw InputError("vector file dimension " + std::to_string(file_dim) +
                     " does not match requested " + std::to_string(dim));
  }
  std::vector<double> values(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    // Tokens never contain spaces; the first field is the token.
    std::string_view rest = line;
    const std::size_t sp = rest.find(' ');
    if (sp == std::string_view::npos) {
      throw ParseError(lineno, "row has no values");
    }
    const std::string token(rest.substr(0, sp));
    rest.remove_prefix(sp + 1);
    std::size_t n = 0;
    const char* p = rest.data();
    const char* end = rest.data() + rest.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      if (n == dim) throw ParseError(lineno, "row has more than dim values");
      double v = 0;
      const auto [q, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || (q < end && *q != ' ')) {
        throw ParseError(lineno, "non-numeric value");
      }
      if (!std::isfinite(v)) throw ParseError(lineno, "non-finite value");
      values[n++] = v;
      p = q;
    }
    if (n != dim) {
      throw ParseError(lineno, "row has " + std::to_string(n) + " values, expected " +
                                   std::to_string(dim));
    }
    visit(token, std::span<const double>(values), lineno);
  }
}

/// Embedding initialised from a text vector file. Vocabulary tokens found in
/// the file (after normalization) take its vector; the rest draw from
/// U(-0.05, 0.05) seeded by `seed`. The pad row is zero.
template <class T>
EmbeddingMatrix<T> load_pretrained(const std::filesystem::path& path,
                                   const TokenVocab& vocab, std::size_t dim,
                                   std::uint64_t seed) {
  EmbeddingMatrix<T> emb(vocab.size(), dim);
  Rng rng(seed);
  emb.randomize(rng, kOovInitRange);
  read_vector_file(path, dim,
                   [&](const std::string& token, std::span<const double> v,
                       std::size_t) {
                     const auto it = vocab.index().find(normalize_word(token));
                     if (it == vocab.index().end() || it->second == emb.pad_id) {
                       return;
                     }
                     auto row = emb.weights.row(static_cast<std::size_t>(it->second));
                     for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<T>(v[j]);
                   });
  emb.pin_pad_row();
  return emb;
}

/// Mean over the mask-true rows of a seq_len x d matrix.
template <class T>
std::vector<T> pool_mean(const Tensor<T>& embedded, const std::vector<bool>& mask) {
  if (mask.size() != embedded.rows()) {
    throw ShapeError("pool_mean: mask length does not match rows");
  }
  std::vector<T> out(embedded.cols(), T(0));
  std::size_t n = 0;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (!mask[r]) continue;
    const auto row = embedded.row(r);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += row[j];
    ++n;
  }
  if (n == 0) throw InputError("pool_mean: mask has no true position");
  for (auto& v : out) v /= static_cast<T>(n);
  return out;
}

}  // namespace lexaug
