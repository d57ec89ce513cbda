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

// Dictionary definitions: endpoint JSON parsing, retrying fetches behind a
// rate limiter, an append-only JSON-lines cache with negative caching, and
// coverage reporting. The network transport is pluggable; the HTTP one
// lives in defs_http.hpp.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lexaug/common.hpp"
#include "lexaug/lexicon.hpp"

namespace lexaug {

inline constexpr const char* kDefaultDictEndpoint =
    "https://api.dictionaryapi.dev/api/v2/entries/en/";
inline constexpr const char* kDictEndpointEnv = "LEXAUG_DICT_ENDPOINT";

inline std::string dict_endpoint_from_env() {
  const char* v = std::getenv(kDictEndpointEnv);
  return v && *v ? std::string(v) : std::string(kDefaultDictEndpoint);
}

enum class DefinitionStatus { Found, Missing, Error };

inline const char* to_string(DefinitionStatus s) {
  switch (s) {
    case DefinitionStatus::Found: return "found";
    case DefinitionStatus::Missing: return "missing";
    case DefinitionStatus::Error: return "error";
  }
  return "?";
}

inline DefinitionStatus parse_status(const std::string& s) {
  if (s == "found") return DefinitionStatus::Found;
  if (s == "missing") return DefinitionStatus::Missing;
  if (s == "error") return DefinitionStatus::Error;
  throw InputError("unknown definition status '" + s + "'");
}

struct DefinitionRecord {
  std::string word;
  std::vector<std::string> definitions;  // endpoint order
  std::string source_url;
  std::int64_t fetched_at = 0;           // unix seconds
  DefinitionStatus status = DefinitionStatus::Missing;
  std::string error;

  friend bool operator==(const DefinitionRecord&, const DefinitionRecord&) = default;
};

inline nlohmann::json to_json(const DefinitionRecord& r) {
  nlohmann::json j = {{"word", r.word},
                      {"status", to_string(r.status)},
                      {"definitions", r.definitions},
                      {"source_url", r.source_url},
                      {"fetched_at", r.fetched_at}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline DefinitionRecord record_from_json(const nlohmann::json& j) {
  DefinitionRecord r;
  r.word = j.at("word").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  r.definitions = j.at("definitions").get<std::vector<std::string>>();
  r.source_url = j.value("source_url", "");
  r.fetched_at = j.value("fetched_at", std::int64_t{0});
  r.error = j.value("error", "");
  return r;
}

/// Definition texts from an entries -> meanings -> definitions response, in
/// document order. Throws ParseError on malformed JSON or structure.
inline std::vector<std::string> parse_definitions_json(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("malformed definition JSON: ") + e.what());
  }
  if (!j.is_array()) throw ParseError(1, "definition JSON is not an array of entries");
  std::vector<std::string> out;
  try {
    for (const auto& entry : j) {
      if (!entry.contains("meanings")) continue;
      for (const auto& meaning : entry.at("meanings")) {
        if (!meaning.contains("definitions")) continue;
        for (const auto& d : meaning.at("definitions")) {
          const auto text = d.at("definition").get<std::string>();
          if (!trim(text).empty()) out.push_back(text);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("unexpected definition JSON layout: ") + e.what());
  }
  return out;
}

/// Joins definitions with "; ", collapses whitespace, lowercases and keeps
/// the first `max_words` whitespace-separated words.
inline std::string normalize_definition(const DefinitionRecord& r, std::size_t max_words = 50) {
  if (r.status != DefinitionStatus::Found) {
    throw InputError("no definition to normalize for '" + r.word + "' (status " +
                     to_string(r.status) + ")");
  }
  std::string joined;
  for (const auto& d : r.definitions) {
    const auto t = trim(d);
    if (t.empty()) continue;
    if (!joined.empty()) joined += "; ";
    joined += t;
  }
  auto words = split_whitespace(normalize_word(joined));
  if (words.size() > max_words) words.resize(max_words);
  return join(words, " ");
}

/// Definition text for the encoder: normalized for Found records, empty
/// (a word-only sequence) for anything else or no record at all.
inline std::string definition_text(const DefinitionRecord* r, std::size_t max_words = 50) {
  if (!r || r->status != DefinitionStatus::Found) return {};
  return normalize_definition(*r, max_words);
}

inline std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 15]);
    }
  }
  return out;
}

inline std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() + 0 && i + 2 <= s.size() - 1) {
      out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------- transport

struct HttpResponse {
  int status = 0;  // 0 = transport failure (no HTTP response)
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& url) = 0;
};

/// Serves `<dir>/<word>.json` for the last path segment of the URL and 404
/// for anything else.
class FixtureTransport : public Transport {
 public:
  explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

  HttpResponse get(const std::string& url) override {
    const auto slash = url.find_last_of('/');
    const std::string word = url_decode(url.substr(slash == std::string::npos ? 0 : slash + 1));
    const auto path = dir_ / (word + ".json");
    if (word.empty() || !std::filesystem::exists(path)) {
      return {404, R"({"title":"No Definitions Found"})", ""};
    }
    return {200, read_file(path), ""};
  }

 private:
  std::filesystem::path dir_;
};

/// Counts requests passed to an inner transport.
class CountingTransport : public Transport {
 public:
  explicit CountingTransport(Transport& inner) : inner_(inner) {}
  HttpResponse get(const std::string& url) override {
    ++count_;
    return inner_.get(url);
  }
  std::size_t count() const { return count_.load(); }

 private:
  Transport& inner_;
  std::atomic<std::size_t> count_{0};
};

// ---------------------------------------------------------------- policies

struct RetryPolicy {
  std::size_t max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  std::chrono::milliseconds delay_before(std::size_t attempt) const {  // attempt >= 1
    double d = static_cast<double>(base_delay.count());
    for (std::size_t i = 1; i < attempt; ++i) d *= multiplier;
    return std::chrono::milliseconds(
        static_cast<long long>(std::min(d, static_cast<double>(max_delay.count()))));
  }
};

inline bool is_transient(const HttpResponse& r) {
  return r.status == 0 || r.status == 429 || r.status >= 500;
}

/// At most `max_concurrent` requests in flight and at least `spacing`
/// between consecutive request starts.
class RateLimiter {
 public:
  explicit RateLimiter(std::size_t max_concurrent = 2,
                       std::chrono::milliseconds spacing = std::chrono::milliseconds(250))
      : max_(std::max<std::size_t>(1, max_concurrent)), spacing_(spacing) {}

  class Permit {
   public:
    explicit Permit(RateLimiter& l) : l_(&l) {}
    Permit(Permit&& o) noexcept : l_(std::exchange(o.l_, nullptr)) {}
    Permit(const Permit&) = delete;
    ~Permit() {
      if (l_) l_->release();
    }

   private:
    RateLimiter* l_;
  };

  Permit acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < max_; });
    ++active_;
    const auto now = std::chrono::steady_clock::now();
    auto start = now;
    if (started_any_) start = std::max(now, last_start_ + spacing_);
    last_start_ = start;
    started_any_ = true;
    peak_ = std::max(peak_, active_);
    lock.unlock();
    if (start > now) std::this_thread::sleep_until(start);
    return Permit(*this);
  }

  std::size_t max_concurrent() const { return max_; }
  std::chrono::milliseconds spacing() const { return spacing_; }
  std::size_t peak() const {
    std::lock_guard lock(mu_);
    return peak_;
  }

 private:
  void release() {
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }

  std::size_t max_;
  std::chrono::milliseconds spacing_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t active_ = 0, peak_ = 0;
  bool started_any_ = false;
  std::chrono::steady_clock::time_point last_start_{};
};

struct FetchContext {
  Transport* transport = nullptr;
  std::string endpoint = kDefaultDictEndpoint;
  RetryPolicy retry;
  RateLimiter* limiter = nullptr;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
  std::function<std::int64_t()> now = [] {
    return static_cast<std::int64_t>(std::chrono::duration_cast<std::chrono::seconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count());
  };
};

/// One word: 200 -> Found (or Error on unusable JSON), 404 -> Missing,
/// transient failures retried with exponential backoff, then Error.
inline DefinitionRecord fetch_definition(const std::string& word, FetchContext& ctx) {
  if (!ctx.transport) throw InputError("fetch_definition: no transport configured");
  DefinitionRecord r;
  r.word = word;
  r.source_url = ctx.endpoint;
  if (!r.source_url.empty() && r.source_url.back() != '/') r.source_url += '/';
  r.source_url += url_encode(word);
  HttpResponse resp;
  for (std::size_t attempt = 1; attempt <= ctx.retry.max_attempts; ++attempt) {
    if (attempt > 1) ctx.sleep(ctx.retry.delay_before(attempt - 1));
    if (ctx.limiter) {
      auto permit = ctx.limiter->acquire();
      resp = ctx.transport->get(r.source_url);
    } else {
      resp = ctx.transport->get(r.source_url);
    }
    if (!is_transient(resp)) break;
  }
  r.fetched_at = ctx.now();
  if (resp.status == 200) {
    try {
      r.definitions = parse_definitions_json(resp.body);
      r.status = r.definitions.empty() ? DefinitionStatus::Missing : DefinitionStatus::Found;
    } catch (const ParseError& e) {
      r.status = DefinitionStatus::Error;
      r.error = e.what();
    }
  } else if (resp.status == 404) {
    r.status = DefinitionStatus::Missing;
  } else {
    r.status = DefinitionStatus::Error;
    r.error = is_transient(resp)
                  ? "retries exhausted after " + std::to_string(ctx.retry.max_attempts) +
                        " attempts (last status " + std::to_string(resp.status) +
                        (resp.error.empty() ? "" : ", " + resp.error) + ")"
                  : "unexpected HTTP status " + std::to_string(resp.status);
  }
  return r;
}

// ---------------------------------------------------------------- cache

/// Append-only JSON-lines file; the last line for a word wins on load.
class DefinitionCache {
 public:
  DefinitionCache() = default;
  explicit DefinitionCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) return;
    std::size_t lineno = 0;
    for (const auto& line : read_lines(path_)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        put(record_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(lineno, "bad cache line in " + path_.string() + ": " + e.what());
      }
    }
  }

  /// Usable cached record: Found always; Missing while younger than the TTL
  /// (negative TTL = never expires); Error never.
  const DefinitionRecord* lookup(const std::string& word, std::int64_t now,
                                 std::int64_t negative_ttl_s) const {
    std::lock_guard lock(mu_);
    const auto it = records_.find(word);
    if (it == records_.end()) return nullptr;
    const auto& r = it->second;
    if (r.status == DefinitionStatus::Found) return &r;
    if (r.status == DefinitionStatus::Missing &&
        (negative_ttl_s < 0 || now - r.fetched_at < negative_ttl_s)) {
      return &r;
    }
    return nullptr;
  }

  const DefinitionRecord* find(const std::string& word) const {
    std::lock_guard lock(mu_);
    const auto it = records_.find(word);
    return it == records_.end() ? nullptr : &it->second;
  }

  void append(const DefinitionRecord& r) {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
      if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      if (!out) throw InputError("cannot write cache " + path_.string());
      out << to_json(r).dump() << "\n";
      out.flush();
    }
    records_[r.word] = r;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  void put(DefinitionRecord r) { records_[r.word] = std::move(r); }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::map<std::string, DefinitionRecord> records_;
};

struct FetchSummary {
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t fetched = 0;
  std::size_t found = 0, missing = 0, errors = 0;
  std::vector<std::string> error_words;
};

/// Fetches every word without a usable cache entry, appending each result as
/// soon as it arrives (an interrupted run keeps its progress). Workers are
/// bounded by the limiter's concurrency.
inline FetchSummary fetch_all(const std::vector<std::string>& words, DefinitionCache& cache,
                              FetchContext& ctx, std::int64_t negative_ttl_s) {
  FetchSummary s;
  s.requested = words.size();
  std::vector<std::string> todo;
  const auto now = ctx.now();
  for (const auto& w : words) {
    if (cache.lookup(w, now, negative_ttl_s)) {
      ++s.cache_hits;
    } else if (std::find(todo.begin(), todo.end(), w) == todo.end()) {
      todo.push_back(w);
    }
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      std::string w;
      {
        std::lock_guard lock(mu);
        if (next >= todo.size() || failure) return;
        w = todo[next++];
      }
      try {
        auto rec = fetch_definition(w, ctx);
        cache.append(rec);
        std::lock_guard lock(mu);
        ++s.fetched;
        if (rec.status == DefinitionStatus::Found) ++s.found;
        if (rec.status == DefinitionStatus::Missing) ++s.missing;
        if (rec.status == DefinitionStatus::Error) {
          ++s.errors;
          s.error_words.push_back(w);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t n_workers =
      std::min(todo.size(), ctx.limiter ? ctx.limiter->max_concurrent() : std::size_t{1});
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::sort(s.error_words.begin(), s.error_words.end());
  return s;
}

struct CoverageReport {
  std::size_t found = 0, missing = 0, error = 0, pending = 0;
  std::vector<std::string> missing_words;  // sorted
  std::vector<std::string> pending_words;  // sorted
};

inline CoverageReport coverage_report(const std::vector<std::string>& words,
                                      const DefinitionCache& cache) {
  CoverageReport c;
  for (const auto& w : words) {
    const auto* r = cache.find(w);
    if (!r) {
      ++c.pending;
      c.pending_words.push_back(w);
      continue;
    }
    switch (r->status) {
      case DefinitionStatus::Found: ++c.found; break;
      case DefinitionStatus::Missing:
        ++c.missing;
        c.missing_words.push_back(w);
        break;
      case DefinitionStatus::Error: ++c.error; break;
    }
  }
  std::sort(c.missing_words.begin(), c.missing_words.end());
  std::sort(c.pending_words.begin(), c.pending_words.end());
  return c;
}

inline CoverageReport coverage_report(const Lexicon& lex, const DefinitionCache& cache) {
  std::vector<std::string> words;
  for (const auto& e : lex.entries()) words.push_back(e.word);
  return coverage_report(words, cache);
}

inline nlohmann::json to_json(const CoverageReport& c) {
  return {{"found", c.found},     {"missing", c.missing},
          {"error", c.error},     {"pending", c.pending},
          {"missing_words", c.missing_words}, {"pending_words", c.pending_words}};
}

}  // namespace lexaug
