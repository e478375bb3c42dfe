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


#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "cli.h"
#include "icr/util.h"
#include "test_support.h"

namespace icr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// The imbalanced fixture written to disk with a synthetic params file.
struct Workspace {
  testing::TempDir dir;
  fs::path task, pool, test, params, cache;

  Workspace() {
    const auto fx = testing::imbalanced_fixture();
    task = dir / "task.toml";
    pool = dir / "pool.jsonl";
    test = dir / "test.jsonl";
    params = dir / "params.json";
    cache = dir / "cache";
    testing::write_text(task, testing::binary_task_toml("imbalanced", {"no", "yes"}));
    testing::write_jsonl(pool, fx.pool);
    testing::write_jsonl(test, fx.test);
    testing::write_text(params, fx.params.to_json().dump());
  }

  std::vector<std::string> synthetic() const {
    return {"--backend", "synthetic", "--synthetic-params", params.string(),
            "--cache-dir", cache.string()};
  }

  std::vector<std::string> with(std::vector<std::string> head,
                                const std::vector<std::string>& tail) const {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  }

  fs::path out(const std::string& name) const { return dir / name; }
};

json error_line(const std::string& err) {
  return json::parse(err.substr(err.rfind('{')));
}

TEST_CASE("select icr with defaults writes a 16-member artifact and manifest") {
  const Workspace ws;
  const auto r = run_cli(ws.with({"select", "--method", "icr", "--task", ws.task.string(),
                                  "--pool", ws.pool.string(), "--seed", "42", "--out",
                                  ws.out("sel").string()},
                                 ws.synthetic()));
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("artifact=") == 0);
  const json artifact = json::parse(slurp(ws.out("sel") / "prompt.json"));
  CHECK(artifact["members"].size() == 16);
  CHECK(artifact["config"]["n"] == 8);
  CHECK(artifact["config"]["pool_cap"] == 500);

  const json manifest = json::parse(slurp(ws.out("sel") / "select.manifest.json"));
  CHECK(manifest["command"] == "select");
  CHECK(manifest["command_line"][0] == "icr");
  CHECK(manifest["prompt_artifact"] == artifact["content_hash"]);
  CHECK(manifest["outputs"][0]["sha256"] ==
        sha256_hex(slurp(ws.out("sel") / "prompt.json")));
  CHECK(manifest["datasets"]["pool"]["sha256"] == sha256_hex(slurp(ws.pool)));
  CHECK(manifest["backend"]["kind"] == "synthetic");
  CHECK(manifest["cache"]["misses"].get<int>() > 0);
  CHECK(manifest.contains("wall_clock_seconds"));
}

TEST_CASE("select rejects n greater than m with a usage error") {
  const Workspace ws;
  const auto r = run_cli(ws.with({"select", "--task", ws.task.string(), "--pool",
                                  ws.pool.string(), "--m", "16", "--n", "20", "--out",
                                  ws.out("bad").string()},
                                 ws.synthetic()));
  CHECK(r.code == cli::kExitUsage);
  const json e = error_line(r.err);
  CHECK(e["error"] == "config");
  CHECK(e["message"].get<std::string>().find("n=20") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommands are usage errors") {
  CHECK(run_cli({"select", "--bogus"}).code == cli::kExitUsage);
  CHECK(run_cli({}).code == cli::kExitUsage);
  CHECK(run_cli({"select", "--method", "topic"}).code == cli::kExitUsage);
}

TEST_CASE("a missing data file is a runtime failure") {
  const Workspace ws;
  const auto r = run_cli(ws.with({"select", "--task", ws.task.string(), "--pool",
                                  (ws.dir / "nope.jsonl").string(), "--out",
                                  ws.out("x").string()},
                                 ws.synthetic()));
  CHECK(r.code == cli::kExitFailure);
  CHECK(error_line(r.err)["error"] == "ingestion");
}

TEST_CASE("select kate writes a plan without touching the backend") {
  const Workspace ws;
  const auto r = run_cli(ws.with({"select", "--method", "kate", "--task",
                                  ws.task.string(), "--pool", ws.pool.string(), "--m",
                                  "4", "--out", ws.out("kate").string()},
                                 ws.synthetic()));
  REQUIRE(r.code == cli::kExitOk);
  const json plan = json::parse(slurp(ws.out("kate") / "plan.json"));
  CHECK(plan["kind"] == "retrieval_plan");
  CHECK(plan["k"] == 4);
  CHECK(plan["nearest_last"] == true);
  const auto stats = run_cli({"cache", "stats", "--cache-dir", ws.cache.string()});
  CHECK(stats.out == "entries=0 bytes=0\n");
}

TEST_CASE("eval prints fixed-format metrics and refuses mismatched tasks") {
  const Workspace ws;
  REQUIRE(run_cli(ws.with({"select", "--method", "uniform", "--task", ws.task.string(),
                           "--pool", ws.pool.string(), "--m", "4", "--seed", "1",
                           "--out", ws.out("u").string()},
                          ws.synthetic()))
              .code == cli::kExitOk);
  // Test cases identical to the demonstrations are answered perfectly.
  const json artifact = json::parse(slurp(ws.out("u") / "prompt.json"));
  std::string lines;
  for (const auto& m : artifact["members"]) {
    lines += json{{"text", m["fields"]["text"]}, {"label", m["label"]}}.dump() + "\n";
  }
  const fs::path perfect = ws.dir / "perfect.jsonl";
  testing::write_text(perfect, lines);
  const auto r = run_cli(ws.with({"eval", "--artifact",
                                  (ws.out("u") / "prompt.json").string(), "--task",
                                  ws.task.string(), "--test", perfect.string(), "--out",
                                  ws.out("e").string()},
                                 ws.synthetic()));
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out == "accuracy=1.0000\nmacro_f1=1.0000\n");
  CHECK(fs::exists(ws.out("e") / "report.json"));
  CHECK(fs::exists(ws.out("e") / "report.csv"));
  CHECK(fs::exists(ws.out("e") / "eval.manifest.json"));

  const fs::path other = ws.dir / "other.toml";
  testing::write_text(other, testing::binary_task_toml("other", {"no", "yes"}));
  const auto refused = run_cli(ws.with({"eval", "--artifact",
                                        (ws.out("u") / "prompt.json").string(),
                                        "--task", other.string(), "--test",
                                        perfect.string(), "--out", ws.out("e2").string()},
                                       ws.synthetic()));
  CHECK(refused.code == cli::kExitUsage);
  const std::string message = error_line(refused.err)["message"];
  CHECK(message.find("'imbalanced'") != std::string::npos);
  CHECK(message.find("'other'") != std::string::npos);

  const auto forced = run_cli(ws.with({"eval", "--artifact",
                                       (ws.out("u") / "prompt.json").string(), "--task",
                                       other.string(), "--test", perfect.string(),
                                       "--force", "--out", ws.out("e3").string()},
                                      ws.synthetic()));
  CHECK(forced.code == cli::kExitOk);
  CHECK(forced.err.find("warning:") == 0);

  const auto transfer = run_cli(ws.with(
      {"eval", "--artifact", (ws.out("u") / "prompt.json").string(), "--task",
       ws.task.string(), "--transfer", "--target", other.string(), "--target-pool",
       ws.pool.string(), "--test", ws.test.string(), "--out", ws.out("t").string()},
      ws.synthetic()));
  REQUIRE(transfer.code == cli::kExitOk);
  CHECK(transfer.out.find("delta_accuracy=") != std::string::npos);
  CHECK(transfer.out.find("delta_macro_f1=") != std::string::npos);
}

TEST_CASE("eval of a plan retrieves per query") {
  const Workspace ws;
  REQUIRE(run_cli(ws.with({"select", "--method", "ambig", "--task", ws.task.string(),
                           "--pool", ws.pool.string(), "--k", "3", "--out",
                           ws.out("a").string()},
                          ws.synthetic()))
              .code == cli::kExitOk);
  const auto r = run_cli(ws.with({"eval", "--artifact",
                                  (ws.out("a") / "plan.json").string(), "--task",
                                  ws.task.string(), "--test", ws.test.string(), "--out",
                                  ws.out("ae").string()},
                                 ws.synthetic()));
  REQUIRE(r.code == cli::kExitOk);
  const json report = json::parse(slurp(ws.out("ae") / "report.json"));
  CHECK(report["n_cases"] == 40);
}

TEST_CASE("best-of-10 needs room for a validation split") {
  const Workspace ws;
  const auto carved = run_cli(ws.with({"select", "--method", "best-of-10", "--task",
                                       ws.task.string(), "--pool", ws.pool.string(),
                                       "--m", "4", "--out", ws.out("b").string()},
                                      ws.synthetic()));
  CHECK(carved.code == cli::kExitUsage);
  const auto explicit_split = run_cli(ws.with(
      {"select", "--method", "best-of-10", "--task", ws.task.string(), "--pool",
       ws.pool.string(), "--validation", ws.test.string(), "--m", "4", "--trials", "3",
       "--out", ws.out("b2").string()},
      ws.synthetic()));
  REQUIRE(explicit_split.code == cli::kExitOk);
  const json artifact = json::parse(slurp(ws.out("b2") / "prompt.json"));
  CHECK(artifact["trace"]["trial_scores"].size() == 3);
  CHECK(artifact["config"]["validation_size"] == 40);
}

TEST_CASE("ablate subcommands write reports of the documented shape") {
  const Workspace ws;
  const std::vector<std::string> common = {"--task", ws.task.string(), "--pool",
                                           ws.pool.string(), "--test",
                                           ws.test.string(), "--m", "4", "--n", "2"};
  auto ablate = [&](const std::string& sub, std::vector<std::string> extra) {
    std::vector<std::string> args = {"ablate", sub};
    args.insert(args.end(), common.begin(), common.end());
    args.insert(args.end(), extra.begin(), extra.end());
    args.push_back("--out");
    args.push_back(ws.out("abl").string());
    return run_cli(ws.with(args, ws.synthetic()));
  };
  REQUIRE(ablate("iters", {"--k", "5"}).code == cli::kExitOk);
  const json iters = json::parse(slurp(ws.out("abl") / "ablation-iteration_sweep.json"));
  CHECK(iters["payload"]["points"].size() == 6);

  REQUIRE(ablate("bins", {"--bins", "5"}).code == cli::kExitOk);
  const std::string csv = slurp(ws.out("abl") / "ablation-misconfidence_bins.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);  // header + 5 rows
  CHECK(fs::exists(ws.out("abl") / "ablation-misconfidence_bins.svg"));

  REQUIRE(ablate("psi", {}).code == cli::kExitOk);
  const json psi = json::parse(slurp(ws.out("abl") / "ablation-psi_case_study.json"));
  CHECK(psi["payload"].contains("histogram"));
  CHECK(psi["payload"]["confusion_before"].size() == 2);
  CHECK(psi["payload"]["confusion_after"].size() == 2);

  const auto variants = ablate("variants", {});
  REQUIRE(variants.code == cli::kExitOk);
  CHECK(std::count(variants.out.begin(), variants.out.end(), '\n') == 2);

  REQUIRE(ablate("distance", {}).code == cli::kExitOk);
  CHECK(fs::exists(ws.out("abl") / "ablation-distance_analysis.json"));
  CHECK(fs::exists(ws.out("abl") / "ablate-distance.manifest.json"));
}

TEST_CASE("cache stats and guarded clear") {
  const Workspace ws;
  CHECK(run_cli({"cache", "stats", "--cache-dir", ws.cache.string()}).out ==
        "entries=0 bytes=0\n");
  REQUIRE(run_cli(ws.with({"select", "--task", ws.task.string(), "--pool",
                           ws.pool.string(), "--m", "4", "--n", "2", "--out",
                           ws.out("s").string()},
                          ws.synthetic()))
              .code == cli::kExitOk);
  // One entry per distinct prompt: the candidates around the initial prompt,
  // where equal texts share one entry.
  const json artifact = json::parse(slurp(ws.out("s") / "prompt.json"));
  std::set<int> members;
  for (const auto& id : artifact["trace"]["initial_member_ids"]) {
    members.insert(id.get<int>());
  }
  std::set<std::string> texts;
  const auto fx = testing::imbalanced_fixture();
  for (const auto& e : fx.pool.examples()) {
    if (!members.contains(e.id)) texts.insert(e.fields.at("text"));
  }
  const std::string entries = std::to_string(texts.size());
  const std::string stats =
      run_cli({"cache", "stats", "--cache-dir", ws.cache.string()}).out;
  CHECK(stats.find("entries=" + entries + " ") == 0);
  CHECK(run_cli({"cache", "clear", "--cache-dir", ws.cache.string()}).code ==
        cli::kExitUsage);
  CHECK(run_cli({"cache", "clear", "--cache-dir", ws.cache.string(), "--yes"}).out ==
        "removed=" + entries + "\n");
}

TEST_CASE("a scoring failure reports the example id") {
  const Workspace ws;
  testing::MockOpenAiServer server;
  server.set_raw_completion_body(R"({"choices": []})");
  const auto r = run_cli({"select", "--task", ws.task.string(), "--pool",
                          ws.pool.string(), "--m", "4", "--n", "2", "--backend",
                          "http", "--base-url", server.base_url(), "--no-cache",
                          "--parallelism", "1", "--out", ws.out("f").string()});
  CHECK(r.code == cli::kExitFailure);
  const json e = error_line(r.err);
  CHECK(e["error"] == "scoring");
  CHECK(e.contains("example_id"));
}

}  // namespace
}  // namespace icr
