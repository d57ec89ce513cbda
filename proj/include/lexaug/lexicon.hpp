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

// labMT-format lexicons: parsing, validation, lookup and the polarity
// grouping shared by every report.

#pragma once

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lexaug/common.hpp"

namespace lexaug {

inline constexpr double kScaleMin = 1.0;
inline constexpr double kScaleMax = 9.0;
inline constexpr int kDefaultRaters = 50;

/// Lowercase, Unicode NFC, and trimmed of surrounding whitespace.
inline std::string normalize_word(std::string_view raw) {
  bool ascii = true;
  for (unsigned char c : raw) ascii &= c < 0x80;
  if (ascii) {
    std::string out(trim(raw));
    for (auto& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  u.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_SUCCESS(status)) {
    icu::UnicodeString n = nfc->normalize(u, status);
    if (U_SUCCESS(status)) u = n;
  }
  int32_t start = 0;
  int32_t end = u.length();
  while (start < end && u_isUWhiteSpace(u.char32At(start))) {
    start = u.moveIndex32(start, 1);
  }
  while (end > start) {
    const int32_t prev = u.moveIndex32(end, -1);
    if (!u_isUWhiteSpace(u.char32At(prev))) break;
    end = prev;
  }
  std::string out;
  u.tempSubStringBetween(start, end).toUTF8String(out);
  return out;
}

struct LexiconEntry {
  std::string word;
  double h_avg = 5.0;
  double sigma = 0.0;
  std::optional<long long> rank;
  std::optional<long long> n_raters;

  int raters() const {
    return n_raters ? static_cast<int>(*n_raters) : kDefaultRaters;
  }
  friend bool operator==(const LexiconEntry&, const LexiconEntry&) = default;
};

enum class SentimentGroup { Negative, Neutral, Positive };

inline const char* to_string(SentimentGroup g) {
  switch (g) {
    case SentimentGroup::Negative: return "negative";
    case SentimentGroup::Neutral: return "neutral";
    case SentimentGroup::Positive: return "positive";
  }
  return "?";
}

/// Negative [1,4), Neutral [4,6], Positive (6,9].
inline SentimentGroup group_of(double h) {
  if (!(h >= kScaleMin && h <= kScaleMax)) {
    throw InputError("happiness score " + format_double(h) +
                     " outside [1, 9]");
  }
  if (h < 4.0) return SentimentGroup::Negative;
  if (h <= 6.0) return SentimentGroup::Neutral;
  return SentimentGroup::Positive;
}

/// Header names for the logical columns. Empty optional names are skipped.
struct ColumnMapping {
  std::string word = "word";
  std::string happiness_average = "happiness_average";
  std::string sigma = "happiness_standard_deviation";
  std::string rank = "happiness_rank";
  std::string n_raters = "n_raters";
  /// Lines before the header row (the original labMT release has three).
  std::size_t skip_lines = 0;
};

/// Immutable after construction; words are unique and keep input order.
class Lexicon {
 public:
  Lexicon() = default;

  Lexicon(std::vector<LexiconEntry> entries, std::string source_name)
      : entries_(std::move(entries)), source_name_(std::move(source_name)) {
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      validate(entries_[i]);
      if (!index_.emplace(entries_[i].word, i).second) {
        throw InputError("duplicate word '" + entries_[i].word + "'");
      }
    }
  }

  static void validate(const LexiconEntry& e) {
    if (e.word.empty()) throw InputError("empty word");
    if (!(e.h_avg >= kScaleMin && e.h_avg <= kScaleMax)) {
      throw InputError("score out of range [1, 9] for '" + e.word + "'");
    }
    if (!(e.sigma >= 0.0) || !std::isfinite(e.sigma)) {
      throw InputError("negative or non-finite sigma for '" + e.word + "'");
    }
    if (e.rank && *e.rank < 1) throw InputError("non-positive rank");
    if (e.n_raters && *e.n_raters < 1) throw InputError("non-positive n_raters");
  }

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const std::string& source_name() const { return source_name_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const LexiconEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Lookup by already-normalized word.
  const LexiconEntry* find(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }
  bool contains(std::string_view word) const { return find(word) != nullptr; }

  std::optional<std::size_t> index_of(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Sub-lexicon from row indices, in the given order.
  Lexicon subset(const std::vector<std::size_t>& rows) const {
    std::vector<LexiconEntry> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(entries_.at(r));
    return Lexicon(std::move(out), source_name_);
  }

  friend bool operator==(const Lexicon& a, const Lexicon& b) {
    return a.entries_ == b.entries_;
  }

 private:
  std::vector<LexiconEntry> entries_;
  std::string source_name_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::optional<std::size_t> column_index(
    const std::vector<std::string>& header, const std::string& name) {
  if (name.empty()) return std::nullopt;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses labMT TSV text. `source_name` labels the result and errors.
inline Lexicon parse_lexicon_text(std::string_view text,
                                  const ColumnMapping& columns = {},
                                  const std::string& source_name = "<text>") {
  std::vector<std::string> lines;
  for (auto& l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(std::move(l));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() <= columns.skip_lines) {
    throw InputError(source_name + ": missing header row");
  }
  const std::size_t header_line = columns.skip_lines;
  const auto header = split(lines[header_line], '\t');
  auto require = [&](const std::string& name) {
    const auto idx = detail::column_index(header, name);
    if (!idx) {
      throw ParseError(header_line + 1,
                       source_name + ": missing column '" + name + "'");
    }
    return *idx;
  };
  const std::size_t c_word = require(columns.word);
  const std::size_t c_avg = require(columns.happiness_average);
  const std::size_t c_sigma = require(columns.sigma);
  const auto c_rank = detail::column_index(header, columns.rank);
  const auto c_raters = detail::column_index(header, columns.n_raters);

  std::vector<LexiconEntry> entries;
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = header_line + 1; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const std::string& line = lines[i];
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != header.size()) {
      throw ParseError(lineno, "expected " + std::to_string(header.size()) +
                                   " columns, found " +
                                   std::to_string(fields.size()));
    }
    LexiconEntry e;
    e.word = normalize_word(fields[c_word]);
    if (e.word.empty()) throw ParseError(lineno, "empty word");
    if (!parse_double(fields[c_avg], e.h_avg)) {
      throw ParseError(lineno, "non-numeric happiness_average '" +
                                   fields[c_avg] + "'");
    }
    if (!(e.h_avg >= kScaleMin && e.h_avg <= kScaleMax)) {
      throw ParseError(lineno, "score out of range [1, 9]: " + fields[c_avg]);
    }
    if (!parse_double(fields[c_sigma], e.sigma) || !std::isfinite(e.sigma)) {
      throw ParseError(lineno, "non-numeric standard deviation '" +
                                   fields[c_sigma] + "'");
    }
    if (e.sigma < 0.0) throw ParseError(lineno, "negative standard deviation");
    auto optional_int = [&](std::optional<std::size_t> col,
                            std::optional<long long>& dst, const char* what) {
      if (!col) return;
      const std::string_view f = trim(fields[*col]);
      if (f.empty() || f == "--") return;
      long long v = 0;
      if (!parse_int(f, v) || v < 1) {
        throw ParseError(lineno, std::string("invalid ") + what + " '" +
                                     std::string(f) + "'");
      }
      dst = v;
    };
    optional_int(c_rank, e.rank, "happiness_rank");
    optional_int(c_raters, e.n_raters, "n_raters");
    const auto [it, fresh] = seen.emplace(e.word, lineno);
    if (!fresh) {
      throw ParseError(lineno, "duplicate word '" + e.word +
                                   "' (first seen on line " +
                                   std::to_string(it->second) + ")");
    }
    entries.push_back(std::move(e));
  }
  return Lexicon(std::move(entries), source_name);
}

inline Lexicon parse_lexicon(const std::filesystem::path& path,
                             const ColumnMapping& columns = {}) {
  return parse_lexicon_text(read_file(path), columns, path.string());
}

/// Canonical labMT TSV. n_raters is written only when some entry sets it.
inline std::string serialize_lexicon(const Lexicon& lex) {
  bool any_raters = false;
  for (const auto& e : lex.entries()) any_raters |= e.n_raters.has_value();
  std::string out =
      "word\thappiness_rank\thappiness_average\thappiness_standard_deviation";
  if (any_raters) out += "\tn_raters";
  out += '\n';
  for (const auto& e : lex.entries()) {
    out += e.word;
    out += '\t';
    out += e.rank ? std::to_string(*e.rank) : "--";
    out += '\t';
    out += format_double(e.h_avg);
    out += '\t';
    out += format_double(e.sigma);
    if (any_raters) {
      out += '\t';
      out += e.n_raters ? std::to_string(*e.n_raters) : "--";
    }
    out += '\n';
  }
  return out;
}

inline bool is_punctuation_only(std::string_view token) {
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(
      icu::StringPiece(token.data(), static_cast<int32_t>(token.size())));
  if (u.isEmpty()) return false;
  for (int32_t i = 0; i < u.length(); i = u.moveIndex32(i, 1)) {
    if (!u_ispunct(u.char32At(i))) return false;
  }
  return true;
}

/// Unweighted mean happiness of the whitespace tokens found in `lex`;
/// nullopt when none match.
inline std::optional<double> score_text(const Lexicon& lex,
                                        std::string_view text) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (const auto& raw : split_whitespace(text)) {
    if (is_punctuation_only(raw)) continue;
    if (const auto* e = lex.find(normalize_word(raw))) {
      sum += e->h_avg;
      ++hits;
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

}  // namespace lexaug
