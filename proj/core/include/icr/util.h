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

#ifndef ICR_UTIL_H_
#define ICR_UTIL_H_

#include <cstddef>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace icr {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::filesystem::path& path);

// Writes via a uniquely named temp file in the same directory followed by
// rename(2), so readers see either the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

// UTC timestamp, ISO-8601 with seconds.
std::string utc_timestamp();

// Runs fn(i) for i in [0, count) on up to `parallelism` threads. Returns one
// exception_ptr per index (null on success); never throws from fn itself.
std::vector<std::exception_ptr> parallel_for(
    std::size_t count, std::size_t parallelism,
    const std::function<void(std::size_t)>& fn);

}  // namespace icr

#endif  // ICR_UTIL_H_
