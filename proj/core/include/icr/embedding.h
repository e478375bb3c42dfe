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

#ifndef ICR_EMBEDDING_H_
#define ICR_EMBEDDING_H_

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icr/backend.h"
#include "icr/task_model.h"

namespace icr {

struct EmbeddingVector {
  std::vector<double> values;
  std::string provider_id;
};

// What to embed. File-backed providers key on (role, id); text-based
// providers only read `text`.
struct EmbedInput {
  std::string_view text;
  std::optional<int> id;
  DatasetRole role = DatasetRole::kTrainPool;
};

// Thread-safe.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(const EmbedInput& input) const = 0;
  // Also the spec string that recreates the provider (see
  // make_embedding_provider), except for "http".
  virtual std::string provider_id() const = 0;
};

// Signed feature hashing of lowercase alphanumeric tokens (bag of words,
// counts) into 256 buckets, L2-normalized. When the signed counts cancel to
// the zero vector the unsigned counts are used instead. Throws LookupError
// for a text without tokens.
class HashingEmbedding : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDimension = 256;

  EmbeddingVector embed(const EmbedInput& input) const override;
  std::string provider_id() const override { return "hashing"; }

  // Bucket index and sign (+1/-1) of one token.
  static std::pair<std::size_t, int> bucket(std::string_view token);
};

// Precomputed vectors from a JSONL sidecar of {"id": int, "vector": [...]}
// records. An optional "role" field ("train-pool" by default) lets one file
// hold pool and test vectors.
class FileEmbedding : public EmbeddingProvider {
 public:
  explicit FileEmbedding(std::filesystem::path path);

  EmbeddingVector embed(const EmbedInput& input) const override;
  std::string provider_id() const override { return "file:" + path_.string(); }

 private:
  std::filesystem::path path_;
  std::map<std::pair<DatasetRole, int>, std::vector<double>> vectors_;
};

// OpenAI-compatible POST /v1/embeddings.
class HttpEmbedding : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(HttpBackendConfig config);

  EmbeddingVector embed(const EmbedInput& input) const override;
  std::string provider_id() const override { return "http"; }

 private:
  HttpCompletionsBackend client_;
  std::string model_;
};

// "hashing", "file:<path>" or "http" (using `http_config`).
std::shared_ptr<const EmbeddingProvider> make_embedding_provider(
    std::string_view spec, const HttpBackendConfig& http_config = {});

// 1 - cos(a, b). Throws on length mismatch or zero vectors.
double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace icr

#endif  // ICR_EMBEDDING_H_
