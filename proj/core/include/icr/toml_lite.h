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

#ifndef ICR_TOML_LITE_H_
#define ICR_TOML_LITE_H_

#include <string_view>

#include <nlohmann/json.hpp>

namespace icr {

// Parses the TOML subset used by task configs into JSON:
//   - bare, quoted and dotted keys; [table] and [a.b] headers
//   - basic, literal and multi-line strings (""" and ''')
//   - integers, floats, booleans
//   - arrays (may span lines, trailing comma allowed) and inline tables
// Dates and arrays of tables are rejected. Throws ConfigError with a line
// number on malformed input.
nlohmann::json parse_toml(std::string_view text);

}  // namespace icr

#endif  // ICR_TOML_LITE_H_
