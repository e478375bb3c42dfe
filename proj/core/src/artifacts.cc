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

#include "icr/artifacts.h"

#include "icr/errors.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

json seal(json body) {
  if (body.contains("content_hash")) {
    throw ContractViolation("document is already sealed");
  }
  const std::string hash = sha256_hex(body.dump());
  body["content_hash"] = hash;
  return body;
}

void verify_seal(const json& document) {
  if (!document.contains("content_hash")) {
    throw ConfigError("artifact has no content_hash");
  }
  json body = document;
  const std::string stored = body.at("content_hash").get<std::string>();
  body.erase("content_hash");
  if (sha256_hex(body.dump()) != stored) {
    throw ConfigError("artifact content does not match its content_hash");
  }
}

json to_json(const PromptArtifact& a) {
  json members = json::array();
  for (const auto& m : a.demos.members) members.push_back(example_to_json(m));
  return seal({{"kind", "prompt"},
               {"task", a.task_name},
               {"label_set_hash", a.label_set_hash},
               {"method", a.method},
               {"seed", a.seed},
               {"config", a.config},
               {"iterations", a.demos.provenance.iterations},
               {"members", members},
               {"trace", a.trace}});
}

json to_json(const PlanArtifact& a) {
  json pool = json::array();
  for (const auto& e : a.plan.pool) pool.push_back(example_to_json(e));
  return seal({{"kind", "retrieval_plan"},
               {"task", a.plan.task_name},
               {"label_set_hash", a.label_set_hash},
               {"method", to_string(a.plan.method)},
               {"k", a.plan.k},
               {"provider", a.plan.provider_id},
               {"nearest_last", a.plan.nearest_last},
               {"pool", pool}});
}

Artifact artifact_from_json(const json& document) {
  try {
    verify_seal(document);
    const std::string kind = document.at("kind").get<std::string>();
    if (kind == "prompt") {
      PromptArtifact a;
      a.task_name = document.at("task").get<std::string>();
      a.label_set_hash = document.at("label_set_hash").get<std::string>();
      a.method = document.at("method").get<std::string>();
      a.seed = document.at("seed").get<std::uint64_t>();
      a.config = document.at("config");
      a.trace = document.at("trace");
      for (const auto& m : document.at("members")) {
        a.demos.members.push_back(example_from_json(m));
      }
      a.demos.source_task = a.task_name;
      a.demos.provenance = {a.method, a.seed,
                            document.value("iterations", 0)};
      a.demos.validate();
      return a;
    }
    if (kind == "retrieval_plan") {
      PlanArtifact a;
      a.label_set_hash = document.at("label_set_hash").get<std::string>();
      a.plan.task_name = document.at("task").get<std::string>();
      a.plan.method =
          parse_retrieval_method(document.at("method").get<std::string>());
      a.plan.k = document.at("k").get<std::size_t>();
      a.plan.provider_id = document.at("provider").get<std::string>();
      a.plan.nearest_last = document.at("nearest_last").get<bool>();
      for (const auto& e : document.at("pool")) {
        a.plan.pool.push_back(example_from_json(e));
      }
      a.plan.validate();
      return a;
    }
    throw ConfigError("unknown artifact kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed artifact: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("malformed artifact: ") + e.what());
  }
}

Artifact load_artifact(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  json document;
  try {
    document = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("artifact '" + path.string() + "' is not JSON: " +
                      e.what());
  }
  return artifact_from_json(document);
}

std::string serialize(const json& document) { return document.dump(2) + "\n"; }

}  // namespace icr
