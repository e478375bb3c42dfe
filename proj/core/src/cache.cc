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

#include "icr/cache.h"

#include <iostream>

#include "icr/errors.h"
#include "icr/util.h"

namespace icr {

namespace fs = std::filesystem;
using nlohmann::json;

json canonical_request(const Backend& backend, const std::string& prompt_text,
                       const LabelSet& label_set) {
  json verbalizers = json::array();
  for (const auto& label : label_set.labels()) {
    verbalizers.push_back({label, label_set.verbalizer(label)});
  }
  return {{"backend", backend.backend_id()},
          {"identity", backend.identity()},
          {"prompt", prompt_text},
          {"verbalizers", verbalizers}};
}

std::string cache_key(const json& canonical) {
  return sha256_hex(canonical.dump());
}

json CacheEntry::to_json() const {
  return {{"key", key},
          {"request", request},
          {"labels", distribution.labels},
          {"probs", distribution.probs},
          {"source", to_string(distribution.source)},
          {"raw", raw},
          {"created_at", created_at}};
}

CacheEntry CacheEntry::from_json(const json& j) {
  CacheEntry e;
  e.key = j.at("key").get<std::string>();
  e.request = j.at("request");
  e.distribution.labels = j.at("labels").get<std::vector<std::string>>();
  e.distribution.probs = j.at("probs").get<std::vector<double>>();
  e.distribution.source =
      parse_distribution_source(j.at("source").get<std::string>());
  e.raw = j.at("raw").get<std::string>();
  e.created_at = j.at("created_at").get<std::string>();
  return e;
}

DiskCache::DiskCache(fs::path root) : root_(std::move(root)) {}

fs::path DiskCache::entry_path(const std::string& key) const {
  if (key.size() < 3) throw ContractViolation("cache key too short");
  return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CacheEntry> DiskCache::lookup(const std::string& key) const {
  const fs::path path = entry_path(key);
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    CacheEntry entry = CacheEntry::from_json(json::parse(read_file(path)));
    if (entry.key != key || cache_key(entry.request) != key) {
      throw Error("key does not match request");
    }
    entry.distribution.validate();
    return entry;
  } catch (const std::exception& e) {
    fs::path quarantine = path;
    quarantine += ".corrupt";
    fs::rename(path, quarantine, ec);
    std::cerr << "warning: corrupt cache entry " << path.string() << " ("
              << e.what() << "); moved to " << quarantine.string() << '\n';
    return std::nullopt;
  }
}

void DiskCache::store(const CacheEntry& entry) const {
  write_file_atomic(entry_path(entry.key), entry.to_json().dump());
}

CacheStats DiskCache::stats() const {
  CacheStats stats;
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return stats;
  for (const auto& item : fs::recursive_directory_iterator(root_)) {
    if (item.is_regular_file() && item.path().extension() == ".json") {
      ++stats.entries;
      stats.bytes += item.file_size();
    }
  }
  return stats;
}

std::uint64_t DiskCache::clear() const {
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) {
    throw ConfigError("cache directory '" + root_.string() +
                      "' does not exist");
  }
  std::uint64_t removed = 0;
  for (const auto& shard : fs::directory_iterator(root_)) {
    if (!shard.is_directory()) continue;
    for (const auto& item : fs::directory_iterator(shard.path())) {
      if (item.path().extension() == ".json") ++removed;
    }
    fs::remove_all(shard.path());
  }
  return removed;
}

CachedBackend::CachedBackend(std::shared_ptr<const Backend> inner,
                             fs::path cache_dir)
    : inner_(std::move(inner)), cache_(std::move(cache_dir)) {
  if (!inner_) throw ContractViolation("cached backend needs an inner backend");
}

BackendResponse CachedBackend::query(const TaskSpec& task,
                                     std::span<const Example> demos,
                                     const FieldMap& query_fields) const {
  json request = canonical_request(
      *inner_, render_prompt(task, demos, query_fields), task.label_set());
  const std::string key = cache_key(request);
  if (auto hit = cache_.lookup(key);
      hit && hit->distribution.labels == task.label_set().labels()) {
    hits_.fetch_add(1);
    hit->distribution.source = DistributionSource::kCache;
    return {std::move(hit->distribution), std::move(hit->raw)};
  }
  misses_.fetch_add(1);
  BackendResponse response = inner_->query(task, demos, query_fields);
  response.distribution.validate();
  cache_.store({key, std::move(request), response.distribution, response.raw,
                utc_timestamp()});
  return response;
}

}  // namespace icr
