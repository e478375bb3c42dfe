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


#include <string>
#include <variant>

#include <doctest.h>

#include "icr/artifacts.h"
#include "icr/errors.h"
#include "icr/util.h"
#include "test_support.h"

namespace icr {
namespace {

using nlohmann::json;

PromptArtifact sample_prompt() {
  const Dataset pool = testing::oracle_pool();
  PromptArtifact a;
  a.task_name = "mood";
  a.label_set_hash = testing::mood_task().label_set().hash();
  a.method = "icr";
  a.seed = 7;
  a.config = {{"m", 2}, {"n", 1}};
  a.demos.members = {pool.at(3), pool.at(11)};
  a.demos.provenance = {"icr", 7, 2};
  a.trace = {{"initial_member_ids", {1, 2}}};
  return a;
}

PlanArtifact sample_plan() {
  PlanArtifact a;
  a.label_set_hash = testing::mood_task().label_set().hash();
  a.plan = {RetrievalMethod::kAmbig, 3, "hashing", "mood",
            testing::oracle_pool().examples()};
  a.plan.nearest_last = false;
  return a;
}

TEST_CASE("sealing hashes the document without its hash field") {
  const json body = {{"kind", "prompt"}, {"x", 1}};
  const json sealed = seal(body);
  CHECK(sealed["content_hash"] == sha256_hex(body.dump()));
  CHECK_NOTHROW(verify_seal(sealed));
  CHECK_THROWS_AS(seal(sealed), ContractViolation);
  json tampered = sealed;
  tampered["x"] = 2;
  CHECK_THROWS_AS(verify_seal(tampered), ConfigError);
  CHECK_THROWS_AS(verify_seal(body), ConfigError);
}

TEST_CASE("prompt artifacts round-trip") {
  const PromptArtifact a = sample_prompt();
  const json doc = to_json(a);
  CHECK(doc["kind"] == "prompt");
  CHECK(doc["iterations"] == 2);
  const Artifact back = artifact_from_json(doc);
  REQUIRE(std::holds_alternative<PromptArtifact>(back));
  const auto& p = std::get<PromptArtifact>(back);
  CHECK(p.task_name == a.task_name);
  CHECK(p.label_set_hash == a.label_set_hash);
  CHECK(p.seed == 7);
  CHECK(p.demos.members == a.demos.members);
  CHECK(p.demos.provenance == a.demos.provenance);
  CHECK(p.trace == a.trace);
  CHECK(to_json(p) == doc);
}

TEST_CASE("plan artifacts round-trip") {
  const PlanArtifact a = sample_plan();
  const json doc = to_json(a);
  CHECK(doc["kind"] == "retrieval_plan");
  const Artifact back = artifact_from_json(doc);
  REQUIRE(std::holds_alternative<PlanArtifact>(back));
  const auto& p = std::get<PlanArtifact>(back);
  CHECK(p.plan.method == RetrievalMethod::kAmbig);
  CHECK(p.plan.k == 3);
  CHECK_FALSE(p.plan.nearest_last);
  CHECK(p.plan.pool == a.plan.pool);
  CHECK(to_json(p) == doc);
}

TEST_CASE("serialization is stable byte for byte") {
  const std::string once = serialize(to_json(sample_prompt()));
  CHECK(once == serialize(to_json(sample_prompt())));
  CHECK(once.back() == '\n');
  CHECK(json::parse(once) == to_json(sample_prompt()));
}

TEST_CASE("loading rejects broken artifacts") {
  const testing::TempDir dir;
  testing::write_text(dir / "ok.json", serialize(to_json(sample_plan())));
  CHECK(std::holds_alternative<PlanArtifact>(load_artifact(dir / "ok.json")));

  CHECK_THROWS_AS(load_artifact(dir / "missing.json"), ConfigError);
  testing::write_text(dir / "garbage.json", "{not json");
  CHECK_THROWS_AS(load_artifact(dir / "garbage.json"), ConfigError);

  json unknown = seal({{"kind", "mystery"}});
  CHECK_THROWS_AS(artifact_from_json(unknown), ConfigError);
  json incomplete = seal({{"kind", "prompt"}, {"task", "mood"}});
  CHECK_THROWS_AS(artifact_from_json(incomplete), ConfigError);

  PromptArtifact dup = sample_prompt();
  dup.demos.members.push_back(dup.demos.members.front());
  CHECK_THROWS_AS(artifact_from_json(to_json(dup)), ConfigError);

  PlanArtifact big = sample_plan();
  big.plan.k = 100;
  CHECK_THROWS_AS(artifact_from_json(to_json(big)), ConfigError);

  json bad_hash = to_json(sample_prompt());
  bad_hash["content_hash"] = 5;
  CHECK_THROWS_AS(artifact_from_json(bad_hash), ConfigError);
}

}  // namespace
}  // namespace icr
