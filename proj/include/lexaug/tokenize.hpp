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

// Input encodings: character n-gram token sequences for the token model and
// WordPiece subword sequences for the dictionary model.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexaug/common.hpp"

namespace lexaug {

using TokenId = std::int32_t;
inline constexpr TokenId kPadId = 0;

struct NgramConfig {
  int n_min = 3;
  int n_max = 5;
  std::size_t seq_len = 50;
  /// FastText-style '<' and '>' around the word before slicing.
  bool boundary_markers = false;

  void validate() const {
    if (n_min < 1 || n_max < n_min) {
      throw InputError("n-gram range requires 1 <= n_min <= n_max");
    }
    if (seq_len < 1) throw InputError("seq_len must be positive");
  }
};

/// Fixed-length ids with a prefix mask; masked-out slots hold kPadId.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<bool> mask;

  std::size_t size() const { return ids.size(); }
  std::size_t valid_length() const {
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    return n;
  }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// The word itself followed by every contiguous n-gram for n = n_min..n_max,
/// left to right within each n. Character-level on UTF-8 code points.
inline std::vector<std::string> char_ngrams(std::string_view word,
                                            const NgramConfig& cfg = {}) {
  cfg.validate();
  if (word.empty()) throw InputError("char_ngrams: empty word");
  std::string source(word);
  if (cfg.boundary_markers) source = "<" + source + ">";
  const auto offsets = utf8_char_offsets(source);
  const std::size_t len = offsets.size() - 1;
  std::vector<std::string> out;
  out.emplace_back(word);
  for (int n = cfg.n_min; n <= cfg.n_max; ++n) {
    const auto un = static_cast<std::size_t>(n);
    if (len < un) continue;
    for (std::size_t i = 0; i + un <= len; ++i) {
      out.push_back(source.substr(offsets[i], offsets[i + un] - offsets[i]));
    }
  }
  return out;
}

/// Looks tokens up in `vocab` (missing -> unk_id), truncates and pads.
inline TokenSequence encode_tokens(
    const std::vector<std::string>& tokens,
    const std::unordered_map<std::string, TokenId>& vocab, TokenId unk_id,
    std::size_t seq_len) {
  if (tokens.empty()) throw InputError("encode_tokens: empty token list");
  TokenSequence seq;
  seq.ids.assign(seq_len, kPadId);
  seq.mask.assign(seq_len, false);
  const std::size_t n = std::min(tokens.size(), seq_len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = vocab.find(tokens[i]);
    seq.ids[i] = it == vocab.end() ? unk_id : it->second;
    seq.mask[i] = true;
  }
  return seq;
}

/// WordPiece vocabulary loaded from a one-token-per-line file (line = id).
class SubwordVocab {
 public:
  static constexpr std::string_view kContinuation = "##";

  SubwordVocab() = default;

  explicit SubwordVocab(std::vector<std::string> tokens,
                        std::string pad = "[PAD]", std::string unk = "[UNK]",
                        std::string cls = "[CLS]", std::string sep = "[SEP]")
      : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw InputError("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
    auto need = [&](const std::string& t) {
      const auto it = index_.find(t);
      if (it == index_.end()) {
        throw InputError("vocabulary lacks special token " + t);
      }
      return it->second;
    };
    pad_ = need(pad);
    if (pad_ != kPadId) throw InputError("pad token must have id 0");
    unk_ = need(unk);
    cls_ = need(cls);
    sep_ = need(sep);
    unk_token_ = unk;
  }

  static SubwordVocab load(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return SubwordVocab(std::move(lines));
  }

  std::size_t size() const { return tokens_.size(); }
  TokenId pad_id() const { return pad_; }
  TokenId unk_id() const { return unk_; }
  TokenId cls_id() const { return cls_; }
  TokenId sep_id() const { return sep_; }
  const std::string& unk_token() const { return unk_token_; }
  const std::string& token(TokenId id) const {
    return tokens_.at(static_cast<std::size_t>(id));
  }
  bool contains(std::string_view t) const {
    return index_.count(std::string(t)) != 0;
  }
  TokenId id_of(std::string_view t) const {
    const auto it = index_.find(std::string(t));
    return it == index_.end() ? unk_ : it->second;
  }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a("subword");
    for (const auto& t : tokens_) h = fnv1a(t + "\n", h);
    return h;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
  std::string unk_token_ = "[UNK]";
};

/// Words longer than this many characters map straight to the unknown token.
inline constexpr std::size_t kMaxWordpieceChars = 100;

/// Greedy longest-match-first decomposition of one whitespace word.
inline std::vector<std::string> wordpiece_word(std::string_view word,
                                               const SubwordVocab& vocab) {
  const auto offsets = utf8_char_offsets(word);
  const std::size_t len = offsets.size() - 1;
  if (len > kMaxWordpieceChars) return {vocab.unk_token()};
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < len) {
    std::size_t end = len;
    std::string match;
    for (; end > start; --end) {
      std::string candidate(
          word.substr(offsets[start], offsets[end] - offsets[start]));
      if (start > 0) candidate.insert(0, SubwordVocab::kContinuation);
      if (vocab.contains(candidate)) {
        match = std::move(candidate);
        break;
      }
    }
    if (end == start) return {vocab.unk_token()};
    pieces.push_back(std::move(match));
    start = end;
  }
  return pieces;
}

inline std::vector<std::string> wordpiece_tokenize(std::string_view text,
                                                   const SubwordVocab& vocab) {
  std::vector<std::string> out;
  for (const auto& w : split_whitespace(text)) {
    for (auto& p : wordpiece_word(w, vocab)) out.push_back(std::move(p));
  }
  return out;
}

struct DefinitionEncoding {
  std::size_t max_words = 50;
  /// Total subword length fed to the encoder.
  std::size_t seq_len = 128;
};

/// [CLS] word-pieces [SEP] definition-pieces, then truncated / padded.
/// Only the first `max_words` whitespace words of the definition are used;
/// an empty definition leaves the word-only sequence.
inline TokenSequence encode_definition(std::string_view word,
                                       std::string_view definition,
                                       const SubwordVocab& vocab,
                                       const DefinitionEncoding& enc = {}) {
  if (trim(word).empty()) throw InputError("encode_definition: empty word");
  std::vector<TokenId> ids;
  ids.push_back(vocab.cls_id());
  for (const auto& p : wordpiece_tokenize(word, vocab)) {
    ids.push_back(vocab.id_of(p));
  }
  ids.push_back(vocab.sep_id());
  auto words = split_whitespace(definition);
  if (words.size() > enc.max_words) words.resize(enc.max_words);
  for (const auto& w : words) {
    for (const auto& p : wordpiece_word(w, vocab)) ids.push_back(vocab.id_of(p));
  }
  TokenSequence seq;
  seq.ids.assign(enc.seq_len, vocab.pad_id());
  seq.mask.assign(enc.seq_len, false);
  const std::size_t n = std::min(ids.size(), enc.seq_len);
  for (std::size_t i = 0; i < n; ++i) {
    seq.ids[i] = ids[i];
    seq.mask[i] = true;
  }
  return seq;
}

}  // namespace lexaug
