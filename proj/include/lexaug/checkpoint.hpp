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

// Checkpoint container: a JSON manifest next to a payload of little-endian
// float32 values, row-major, one tensor after another in manifest order.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexaug/common.hpp"
#include "lexaug/nn.hpp"
#include "lexaug/transformer.hpp"

namespace lexaug {

inline constexpr int kCheckpointSchema = 1;

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct CheckpointManifest {
  int schema_version = kCheckpointSchema;
  std::string model_kind;  // "token" or "dictionary"
  nlohmann::json dims;
  std::string vocab_hash;
  std::uint64_t seed = 0;
  int fold = -1;
  std::size_t param_count = 0;
  std::vector<ParamSpec> params;
  std::string payload;
  int best_epoch = -1;
  double best_val_mae = 0.0;
};

inline nlohmann::json to_json(const TokenModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"embed_dim", c.embed_dim},
          {"hidden", c.hidden},
          {"dropout", c.dropout},
          {"freeze_embeddings", c.freeze_embeddings}};
}

inline nlohmann::json to_json(const DictionaryModelConfig& c) {
  const auto& e = c.encoder;
  return {{"vocab_size", e.vocab_size},   {"layers", e.layers},
          {"heads", e.heads},             {"model_dim", e.model_dim},
          {"ff_dim", e.ff_dim},           {"max_seq_len", e.max_seq_len},
          {"encoder_dropout", e.dropout}, {"positional", e.positional},
          {"hidden", c.hidden},           {"dropout", c.head_dropout},
          {"freeze_encoder", c.freeze_encoder}};
}

inline void from_json(const nlohmann::json& j, TokenModelConfig& c) {
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.dropout = j.at("dropout").get<double>();
  c.freeze_embeddings = j.at("freeze_embeddings").get<bool>();
}

inline void from_json(const nlohmann::json& j, DictionaryModelConfig& c) {
  auto& e = c.encoder;
  e.vocab_size = j.at("vocab_size").get<std::size_t>();
  e.layers = j.at("layers").get<std::size_t>();
  e.heads = j.at("heads").get<std::size_t>();
  e.model_dim = j.at("model_dim").get<std::size_t>();
  e.ff_dim = j.at("ff_dim").get<std::size_t>();
  e.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  e.dropout = j.at("encoder_dropout").get<double>();
  e.positional = j.at("positional").get<bool>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.head_dropout = j.at("dropout").get<double>();
  c.freeze_encoder = j.at("freeze_encoder").get<bool>();
}

inline nlohmann::json manifest_json(const CheckpointManifest& m) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : m.params) params.push_back({{"name", p.name}, {"shape", p.shape}});
  return {{"schema_version", m.schema_version},
          {"model_kind", m.model_kind},
          {"dims", m.dims},
          {"vocab_hash", m.vocab_hash},
          {"seed", m.seed},
          {"fold", m.fold},
          {"param_count", m.param_count},
          {"params", params},
          {"payload", m.payload},
          {"best_epoch", m.best_epoch},
          {"best_val_mae", m.best_val_mae}};
}

inline CheckpointManifest parse_manifest(const std::string& text,
                                         const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest " + origin + ": " + e.what());
  }
  CheckpointManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kCheckpointSchema) {
      throw InputError("unsupported checkpoint schema " +
                       std::to_string(m.schema_version) + " in " + origin);
    }
    m.model_kind = j.at("model_kind").get<std::string>();
    m.dims = j.at("dims");
    m.vocab_hash = j.at("vocab_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.fold = j.at("fold").get<int>();
    m.param_count = j.at("param_count").get<std::size_t>();
    for (const auto& p : j.at("params")) {
      m.params.push_back({p.at("name").get<std::string>(),
                          p.at("shape").get<std::vector<std::size_t>>()});
    }
    m.payload = j.at("payload").get<std::string>();
    m.best_epoch = j.value("best_epoch", -1);
    m.best_val_mae = j.value("best_val_mae", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest " + origin + ": " + e.what());
  }
  return m;
}

namespace detail {

inline void put_f32(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

inline float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<float>(bits);
}

}  // namespace detail

/// Payload bytes for the given parameters (values narrowed to float32).
template <class T>
std::string encode_payload(const std::vector<Param<T>>& params) {
  std::string out;
  std::size_t total = 0;
  for (const auto& p : params) total += p.value->size();
  out.reserve(total * 4);
  for (const auto& p : params) {
    for (T v : p.value->values()) detail::put_f32(out, static_cast<float>(v));
  }
  return out;
}

inline std::string model_hash(const std::string& payload) {
  return hex64(fnv1a(payload));
}

/// Writes `<stem>.json` and `<stem>.bin`. The manifest's params, payload and
/// param_count fields are filled in from the model.
template <class M>
void save_checkpoint(const std::filesystem::path& stem, M& model,
                     CheckpointManifest manifest) {
  const auto params = model.parameters();
  manifest.params.clear();
  manifest.param_count = 0;
  for (const auto& p : params) {
    manifest.params.push_back({p.name, p.value->shape()});
    manifest.param_count += p.value->size();
  }
  manifest.payload = stem.filename().string() + ".bin";
  write_file(stem.parent_path() / manifest.payload, encode_payload(params));
  std::filesystem::path json_path = stem;
  json_path += ".json";
  write_file(json_path, manifest_json(manifest).dump(2) + "\n");
}

/// Reads the manifest at `json_path` and copies its payload into `model`,
/// whose parameter names and shapes must match exactly.
template <class M>
CheckpointManifest load_checkpoint(const std::filesystem::path& json_path, M& model) {
  auto manifest = parse_manifest(read_file(json_path), json_path.string());
  const std::string payload = read_file(json_path.parent_path() / manifest.payload);
  auto params = model.parameters();
  if (params.size() != manifest.params.size()) {
    throw InputError("checkpoint " + json_path.string() + " has " +
                     std::to_string(manifest.params.size()) +
                     " tensors, model expects " + std::to_string(params.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamSpec expect{params[i].name, params[i].value->shape()};
    if (!(expect == manifest.params[i])) {
      throw InputError("checkpoint tensor " + manifest.params[i].name + " " +
                       shape_string(manifest.params[i].shape) +
                       " does not match model tensor " + expect.name + " " +
                       shape_string(expect.shape));
    }
    total += params[i].value->size();
  }
  if (payload.size() != total * 4) {
    throw InputError("checkpoint payload " + manifest.payload + " has " +
                     std::to_string(payload.size()) + " bytes, expected " +
                     std::to_string(total * 4));
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  for (auto& p : params) {
    for (auto& v : p.value->values()) {
      v = static_cast<typename M::Scalar>(detail::get_f32(bytes));
      bytes += 4;
    }
  }
  model.touch();
  return manifest;
}

}  // namespace lexaug
