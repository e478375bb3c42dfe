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

#ifndef ICR_CACHE_H_
#define ICR_CACHE_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "icr/backend.h"

namespace icr {

// Canonical request document hashed into a cache key: backend identity,
// full prompt text and the ordered verbalizers.
nlohmann::json canonical_request(const Backend& backend,
                                 const std::string& prompt_text,
                                 const LabelSet& label_set);

// SHA-256 of canonical_request(...).dump().
std::string cache_key(const nlohmann::json& canonical);

struct CacheEntry {
  std::string key;
  nlohmann::json request;
  LabelDistribution distribution;
  std::string raw;
  std::string created_at;

  nlohmann::json to_json() const;
  static CacheEntry from_json(const nlohmann::json& j);
};

struct CacheStats {
  std::uint64_t entries = 0;
  std::uint64_t bytes = 0;
};

// One JSON file per entry at <root>/<first two hex chars>/<key>.json.
class DiskCache {
 public:
  explicit DiskCache(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path entry_path(const std::string& key) const;

  // Unreadable or inconsistent entries are renamed to *.corrupt, reported
  // on stderr, and treated as a miss.
  std::optional<CacheEntry> lookup(const std::string& key) const;
  // Atomic: temp file + rename.
  void store(const CacheEntry& entry) const;

  // Zero for a missing directory.
  CacheStats stats() const;
  // Removes all entries; returns how many were removed. Throws when the
  // directory does not exist.
  std::uint64_t clear() const;

 private:
  std::filesystem::path root_;
};

// Read-through cache around another backend. Hits report
// DistributionSource::kCache and never reach the inner backend.
class CachedBackend : public Backend {
 public:
  CachedBackend(std::shared_ptr<const Backend> inner,
                std::filesystem::path cache_dir);

  BackendResponse query(const TaskSpec& task, std::span<const Example> demos,
                        const FieldMap& query_fields) const override;
  std::string backend_id() const override { return inner_->backend_id(); }
  nlohmann::json identity() const override { return inner_->identity(); }
  std::size_t parallelism() const override { return inner_->parallelism(); }

  const DiskCache& cache() const { return cache_; }
  std::uint64_t hits() const { return hits_.load(); }
  std::uint64_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<const Backend> inner_;
  DiskCache cache_;
  mutable std::atomic<std::uint64_t> hits_{0};
  mutable std::atomic<std::uint64_t> misses_{0};
};

}  // namespace icr

#endif  // ICR_CACHE_H_
