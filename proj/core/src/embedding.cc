// Copyright 2026 The ICR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "icr/embedding.h"

#include <cctype>
#include <cmath>

#include "icr/errors.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

namespace {

void check_vector(const std::vector<double>& values, const std::string& what) {
  if (values.empty()) throw LookupError(what + ": empty embedding");
  bool nonzero = false;
  for (double v : values) {
    if (!std::isfinite(v)) throw LookupError(what + ": non-finite embedding");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw LookupError(what + ": zero embedding");
}

}  // namespace

std::pair<std::size_t, int> HashingEmbedding::bucket(std::string_view token) {
  // FNV-1a 64; low bits pick the bucket, bit 63 the sign.
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : token) h = (h ^ c) * 1099511628211ULL;
  return {static_cast<std::size_t>(h % kDimension), (h >> 63) ? -1 : 1};
}

EmbeddingVector HashingEmbedding::embed(const EmbedInput& input) const {
  std::vector<std::size_t> buckets;
  std::vector<int> signs;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    auto [index, sign] = bucket(token);
    buckets.push_back(index);
    signs.push_back(sign);
    token.clear();
  };
  for (char c : input.text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      token.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  if (buckets.empty()) {
    throw LookupError("text '" + std::string(input.text.substr(0, 40)) +
                      "' has no tokens to embed");
  }
  auto accumulate = [&](bool signed_counts) {
    std::vector<double> values(kDimension, 0.0);
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      values[buckets[i]] += signed_counts ? signs[i] : 1;
    }
    return values;
  };
  std::vector<double> values = accumulate(true);
  double norm = 0.0;
  for (double v : values) norm += v * v;
  // Signed collisions can cancel every bucket; unsigned counts cannot.
  if (norm == 0.0) {
    values = accumulate(false);
    for (double v : values) norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : values) v /= norm;
  return {std::move(values), provider_id()};
}

FileEmbedding::FileEmbedding(std::filesystem::path path)
    : path_(std::move(path)) {
  std::string content;
  try {
    content = read_file(path_);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  std::size_t dimension = 0;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where =
        path_.string() + " line " + std::to_string(line_no);
    try {
      const json record = json::parse(line);
      const int id = record.at("id").get<int>();
      const DatasetRole role =
          parse_dataset_role(record.value("role", std::string("train-pool")));
      auto values = record.at("vector").get<std::vector<double>>();
      check_vector(values, where);
      if (dimension == 0) dimension = values.size();
      if (values.size() != dimension) {
        throw ConfigError(where + ": embedding length " +
                          std::to_string(values.size()) + " != " +
                          std::to_string(dimension));
      }
      vectors_[{role, id}] = std::move(values);
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
}

EmbeddingVector FileEmbedding::embed(const EmbedInput& input) const {
  if (!input.id) {
    throw LookupError("precomputed embeddings need an example id");
  }
  auto it = vectors_.find({input.role, *input.id});
  if (it == vectors_.end()) {
    throw LookupError("no embedding for " + to_string(input.role) + " id " +
                      std::to_string(*input.id) + " in " + path_.string());
  }
  return {it->second, provider_id()};
}

HttpEmbedding::HttpEmbedding(HttpBackendConfig config)
    : client_(config), model_(config.model) {}

EmbeddingVector HttpEmbedding::embed(const EmbedInput& input) const {
  if (input.text.empty()) throw ContractViolation("empty text to embed");
  const std::string raw = client_.post_json(
      "/v1/embeddings", {{"model", model_}, {"input", input.text}});
  std::vector<double> values;
  try {
    values = json::parse(raw)
                 .at("data")
                 .at(0)
                 .at("embedding")
                 .get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ExtractionError(
        std::string("embedding response malformed: ") + e.what(), raw);
  }
  check_vector(values, "http embedding");
  return {std::move(values), provider_id()};
}

std::shared_ptr<const EmbeddingProvider> make_embedding_provider(
    std::string_view spec, const HttpBackendConfig& http_config) {
  if (spec == "hashing") return std::make_shared<HashingEmbedding>();
  if (spec == "http") return std::make_shared<HttpEmbedding>(http_config);
  if (spec.starts_with("file:")) {
    return std::make_shared<FileEmbedding>(std::string(spec.substr(5)));
  }
  throw ConfigError("unknown embedding provider '" + std::string(spec) +
                    "' (expected hashing, http or file:<path>)");
}

double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw ContractViolation("embedding length mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw ContractViolation("zero embedding");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace icr
