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

// On-disk selection outputs: a fixed prompt artifact or a retrieval plan.
// Both are JSON documents with a "kind" tag and a "content_hash" equal to the
// SHA-256 of the document serialized without that field. Neither contains
// timestamps, so identical runs produce identical bytes.

#ifndef ICR_ARTIFACTS_H_
#define ICR_ARTIFACTS_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "icr/baselines.h"
#include "icr/task_model.h"

namespace icr {

struct PromptArtifact {
  std::string task_name;
  std::string label_set_hash;
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  DemonstrationSet demos;
  nlohmann::json trace = nullptr;
};

struct PlanArtifact {
  std::string label_set_hash;
  RetrievalPlan plan;
};

// Adds "content_hash"; `body` must not already carry one.
nlohmann::json seal(nlohmann::json body);
// Throws ConfigError when the stored hash does not match the content.
void verify_seal(const nlohmann::json& document);

nlohmann::json to_json(const PromptArtifact& artifact);
nlohmann::json to_json(const PlanArtifact& artifact);

using Artifact = std::variant<PromptArtifact, PlanArtifact>;

// Parses and verifies either kind.
Artifact artifact_from_json(const nlohmann::json& document);
Artifact load_artifact(const std::filesystem::path& path);

// Pretty-printed with a trailing newline.
std::string serialize(const nlohmann::json& document);

}  // namespace icr

#endif  // ICR_ARTIFACTS_H_
