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

#include "cli.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "icr/ablation.h"
#include "icr/artifacts.h"
#include "icr/backend.h"
#include "icr/baselines.h"
#include "icr/cache.h"
#include "icr/embedding.h"
#include "icr/errors.h"
#include "icr/evaluation.h"
#include "icr/random.h"
#include "icr/selection.h"
#include "icr/task_model.h"
#include "icr/util.h"

namespace icr::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::size_t kDefaultValidationSize = 100;

// ----------------------------------------------------------------- flags

struct BackendFlags {
  std::string kind = "http";
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-3.5-turbo-instruct";
  std::string synthetic_params;
  std::size_t parallelism = 0;
  std::string cache_dir;
  bool no_cache = false;
};

struct LoopFlags {
  std::size_t m = 16;
  std::size_t n = 8;
  int iters = 1;
  std::size_t pool_cap = 500;  // 0 disables the cap
  std::uint64_t seed = 0;
  std::string init_mode = "uniform";
  bool skip_failures = false;
};

struct SelectFlags {
  std::string method = "icr";
  std::string task;
  std::string pool;
  std::string validation;
  std::size_t validation_size = kDefaultValidationSize;
  std::size_t trials = 10;
  std::string metric = "accuracy";
  std::string embeddings = "hashing";
  std::string embedding_model = "text-embedding-3-small";
  std::size_t k = 0;  // 0 means m
  bool farthest_last = false;
  std::string out = ".";
  LoopFlags loop;
  BackendFlags backend;
};

struct EvalFlags {
  std::string artifact;
  std::string task;
  std::string test;
  bool transfer = false;
  std::string target;
  std::string target_pool;
  std::string label_map;
  std::uint64_t seed = 0;
  std::string embedding_model = "text-embedding-3-small";
  std::string out = ".";
  bool force = false;
  bool skip_failures = false;
  BackendFlags backend;
};

struct AblateFlags {
  std::string task;
  std::string pool;
  std::string test;
  std::string artifact;
  int max_iterations = 5;
  std::size_t bins = 5;
  std::size_t seed_count = 3;
  std::size_t histogram_bins = 10;
  std::string embeddings = "hashing";
  std::string embedding_model = "text-embedding-3-small";
  std::string out = ".";
  LoopFlags loop;
  BackendFlags backend;
};

struct CacheFlags {
  std::string cache_dir;
  bool yes = false;
};

void add_backend_flags(CLI::App* app, BackendFlags& f) {
  app->add_option("--backend", f.kind, "Model backend")
      ->check(CLI::IsMember({"http", "synthetic"}))
      ->capture_default_str();
  app->add_option("--base-url", f.base_url, "OpenAI-compatible endpoint")
      ->capture_default_str();
  app->add_option("--model", f.model, "Completion model name")
      ->capture_default_str();
  app->add_option("--synthetic-params", f.synthetic_params,
                  "JSON file with synthetic backend parameters");
  app->add_option("--parallelism", f.parallelism,
                  "Concurrent backend calls (0 = backend default)");
  app->add_option("--cache-dir", f.cache_dir,
                  "Response cache directory (default $ICR_CACHE_DIR or "
                  "./.icr-cache)");
  app->add_flag("--no-cache", f.no_cache, "Bypass the response cache");
}

void add_loop_flags(CLI::App* app, LoopFlags& f) {
  app->add_option("--m", f.m, "Demonstrations per prompt")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--n", f.n, "Members replaced per round")
      ->capture_default_str();
  app->add_option("--iters", f.iters, "Refinement rounds")
      ->capture_default_str();
  app->add_option("--pool-cap", f.pool_cap,
                  "Stratified pool size cap (0 = none)")
      ->capture_default_str();
  app->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  app->add_option("--init-mode", f.init_mode, "Initial prompt draw")
      ->check(CLI::IsMember({"uniform", "stratified"}))
      ->capture_default_str();
  app->add_flag("--skip-failures", f.skip_failures,
                "Drop failing cases instead of aborting");
}

// --------------------------------------------------------------- helpers

fs::path resolve_cache_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ICR_CACHE_DIR"); env && *env) return env;
  return ".icr-cache";
}

struct BackendHandle {
  std::shared_ptr<const Backend> backend;
  std::shared_ptr<const CachedBackend> cached;  // null with --no-cache
  HttpBackendConfig http_config;
};

HttpBackendConfig http_config_from(const BackendFlags& f) {
  HttpBackendConfig config;
  config.base_url = f.base_url;
  config.model = f.model;
  if (const char* key = std::getenv("ICR_API_KEY")) config.api_key = key;
  if (f.parallelism > 0) config.parallelism = f.parallelism;
  return config;
}

BackendHandle make_backend(const BackendFlags& f) {
  BackendHandle handle;
  handle.http_config = http_config_from(f);
  std::shared_ptr<const Backend> inner;
  if (f.kind == "synthetic") {
    SyntheticModelParams params;
    if (!f.synthetic_params.empty()) {
      try {
        params = SyntheticModelParams::from_json(
            json::parse(read_file(f.synthetic_params)));
      } catch (const json::exception& e) {
        throw ConfigError("invalid synthetic params '" + f.synthetic_params +
                          "': " + e.what());
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    }
    params.validate();
    inner = std::make_shared<SyntheticBackend>(params);
  } else {
    inner = std::make_shared<HttpCompletionsBackend>(handle.http_config);
  }
  if (f.no_cache) {
    handle.backend = inner;
  } else {
    handle.cached = std::make_shared<CachedBackend>(
        inner, resolve_cache_dir(f.cache_dir));
    handle.backend = handle.cached;
  }
  return handle;
}

Dataset load(const std::string& path, const TaskSpec& task, DatasetRole role) {
  return load_dataset(path, infer_format(path), task, role);
}

std::string file_hash(const std::string& path) {
  return sha256_hex(read_file(path));
}

std::string format_metric(const char* name, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%s=%.4f", name, value);
  return buffer;
}

std::string format_delta(const char* name, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%s=%+.4f", name, value);
  return buffer;
}

// Collects everything needed to rerun a command and references every output
// by content hash.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args)
      : started_(Clock::now()) {
    doc_["command"] = std::move(command);
    json line = json::array({"icr"});
    for (const auto& a : args) line.push_back(a);
    doc_["command_line"] = line;
    doc_["config"] = json::object();
    doc_["seeds"] = json::object();
    doc_["backend"] = nullptr;
    doc_["datasets"] = json::object();
    doc_["prompt_artifact"] = nullptr;
    doc_["outputs"] = json::array();
    doc_["metrics"] = json::object();
    doc_["skipped_ids"] = json::array();
  }

  json& operator[](const char* key) { return doc_[key]; }

  void add_dataset(const std::string& role, const std::string& path) {
    doc_["datasets"][role] = {{"path", path}, {"sha256", file_hash(path)}};
  }

  void set_backend(const BackendHandle& handle) {
    doc_["backend"] = {{"kind", handle.backend->backend_id()},
                       {"identity", handle.backend->identity()}};
    backend_ = handle.cached;
    if (handle.cached) {
      doc_["backend"]["cache_dir"] = handle.cached->cache().root().string();
    }
  }

  // Writes `content` atomically to dir/name and records its hash.
  fs::path write_output(const fs::path& dir, const std::string& name,
                        const std::string& content) {
    const fs::path path = dir / name;
    write_file_atomic(path, content);
    doc_["outputs"].push_back(
        {{"path", path.string()}, {"sha256", sha256_hex(content)}});
    return path;
  }

  void write(const fs::path& dir, const std::string& name) {
    if (backend_) {
      doc_["cache"] = {{"hits", backend_->hits()},
                       {"misses", backend_->misses()}};
    }
    const double seconds =
        std::chrono::duration<double>(Clock::now() - started_).count();
    doc_["wall_clock_seconds"] = seconds;
    doc_["created_at"] = utc_timestamp();
    write_file_atomic(dir / name, serialize(doc_));
  }

 private:
  json doc_;
  Clock::time_point started_;
  std::shared_ptr<const CachedBackend> backend_;
};

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw ConfigError("cannot create output directory '" + out +
                      "': " + ec.message());
  }
  return dir;
}

ICRConfig loop_config(const LoopFlags& f, const BackendFlags& b) {
  ICRConfig config;
  config.m = f.m;
  config.n = f.n;
  config.k = f.iters;
  config.seed = f.seed;
  config.pool_cap =
      f.pool_cap ? std::optional<std::size_t>(f.pool_cap) : std::nullopt;
  config.init_mode = parse_init_mode(f.init_mode);
  config.score_options.parallelism = b.parallelism;
  config.score_options.skip_failures = f.skip_failures;
  config.validate();
  return config;
}

std::vector<int> collect_skipped(const IcrTrace& trace) {
  std::vector<int> out;
  for (const auto& it : trace.iterations) {
    out.insert(out.end(), it.skipped_ids.begin(), it.skipped_ids.end());
  }
  return out;
}

HttpBackendConfig embedding_config(const BackendFlags& b,
                                   const std::string& model) {
  HttpBackendConfig config = http_config_from(b);
  config.model = model;
  return config;
}

// ---------------------------------------------------------------- select

// Best-of-N needs held-out validation cases. Without --validation they are
// carved out of the pool by a stratified draw and removed from it.
std::pair<Dataset, Dataset> split_validation(const SelectFlags& f,
                                             const TaskSpec& task,
                                             const Dataset& pool,
                                             Manifest& manifest) {
  const LabelSet& labels = task.label_set();
  if (!f.validation.empty()) {
    Dataset validation = load(f.validation, task, DatasetRole::kValidation);
    manifest.add_dataset("validation", f.validation);
    if (validation.size() > f.validation_size) {
      validation =
          stratified_subsample(validation, labels, f.validation_size,
                               derive_seed(f.loop.seed, "validation"));
    }
    return {pool, validation};
  }
  if (pool.size() < f.validation_size + f.loop.m) {
    throw ConfigError("pool of " + std::to_string(pool.size()) +
                      " examples is too small to hold out " +
                      std::to_string(f.validation_size) +
                      " validation cases; pass --validation");
  }
  Dataset held = stratified_subsample(pool, labels, f.validation_size,
                                      derive_seed(f.loop.seed, "validation"));
  std::vector<Example> rest;
  for (const auto& e : pool.examples()) {
    if (!held.find(e.id)) rest.push_back(e);
  }
  std::vector<Example> validation(held.examples().begin(),
                                  held.examples().end());
  return {Dataset(std::move(rest), DatasetRole::kTrainPool),
          Dataset(std::move(validation), DatasetRole::kValidation)};
}

int cmd_select(const SelectFlags& f, const std::vector<std::string>& args,
               std::ostream& out) {
  Manifest manifest("select", args);
  const TaskSpec task = load_task_config(f.task);
  const Dataset pool = load(f.pool, task, DatasetRole::kTrainPool);
  manifest.add_dataset("task", f.task);
  manifest.add_dataset("pool", f.pool);
  manifest["seeds"]["seed"] = f.loop.seed;
  const fs::path dir = prepare_out(f.out);
  const std::string label_hash = task.label_set().hash();

  if (f.method == "kate" || f.method == "ambig") {
    PlanArtifact artifact;
    artifact.label_set_hash = label_hash;
    artifact.plan.method = parse_retrieval_method(f.method);
    artifact.plan.k = f.k ? f.k : f.loop.m;
    artifact.plan.task_name = task.name();
    artifact.plan.pool = pool.examples();
    artifact.plan.nearest_last = !f.farthest_last;
    // Fails early on a bad provider spec or an unreadable sidecar.
    const auto provider = make_embedding_provider(
        f.embeddings, embedding_config(f.backend, f.embedding_model));
    artifact.plan.provider_id = provider->provider_id();
    artifact.plan.validate();
    const json doc = to_json(artifact);
    manifest["config"] = {{"method", f.method},
                          {"k", artifact.plan.k},
                          {"embeddings", artifact.plan.provider_id},
                          {"nearest_last", artifact.plan.nearest_last}};
    manifest["prompt_artifact"] = doc.at("content_hash");
    const fs::path path = manifest.write_output(dir, "plan.json", serialize(doc));
    manifest.write(dir, "select.manifest.json");
    out << "artifact=" << path.string() << "\n";
    return kExitOk;
  }

  PromptArtifact artifact;
  artifact.task_name = task.name();
  artifact.label_set_hash = label_hash;
  artifact.method = f.method;
  artifact.seed = f.loop.seed;

  if (f.method == "icr") {
    const ICRConfig config = loop_config(f.loop, f.backend);
    const BackendHandle backend = make_backend(f.backend);
    manifest.set_backend(backend);
    IcrResult result = icr_select(*backend.backend, task, pool, config);
    artifact.config = config.to_json();
    artifact.demos = std::move(result.demos);
    artifact.trace = result.trace.to_json();
    manifest["skipped_ids"] = collect_skipped(result.trace);
  } else if (f.method == "uniform") {
    artifact.demos = uniform_select(pool, task.label_set(), f.loop.m,
                                    f.loop.seed);
    artifact.config = {{"m", f.loop.m}};
  } else if (f.method == "best-of-10") {
    if (f.trials < 1) throw ConfigError("--trials must be >= 1");
    const SelectionMetric metric = f.metric == "macro-f1"
                                       ? SelectionMetric::kMacroF1
                                       : SelectionMetric::kAccuracy;
    auto [selection_pool, validation] =
        split_validation(f, task, pool, manifest);
    const BackendHandle backend = make_backend(f.backend);
    manifest.set_backend(backend);
    BestOfNResult result =
        best_of_n_select(*backend.backend, task, selection_pool, f.loop.m,
                         f.trials, validation, f.loop.seed, metric);
    json validation_ids = json::array();
    for (const auto& e : validation.examples()) validation_ids.push_back(e.id);
    artifact.config = {{"m", f.loop.m},
                       {"trials", f.trials},
                       {"metric", f.metric},
                       {"validation_size", validation.size()}};
    artifact.trace = {{"best_trial", result.best_trial},
                      {"trial_scores", result.trial_scores},
                      {"validation_ids", validation_ids}};
    artifact.demos = std::move(result.demos);
  } else {
    throw ConfigError("unknown method '" + f.method + "'");
  }
  artifact.demos.source_task = task.name();
  const json doc = to_json(artifact);
  manifest["config"] = artifact.config;
  manifest["config"]["method"] = f.method;
  manifest["prompt_artifact"] = doc.at("content_hash");
  const fs::path path =
      manifest.write_output(dir, "prompt.json", serialize(doc));
  manifest.write(dir, "select.manifest.json");

  out << "artifact=" << path.string() << "\n";
  out << "members=";
  const auto ids = artifact.demos.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << (i ? "," : "") << ids[i];
  }
  out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ eval

void check_task_match(const std::string& artifact_task,
                      const std::string& artifact_hash, const TaskSpec& task,
                      bool force, std::ostream& err) {
  std::string problem;
  if (artifact_task != task.name()) {
    problem = "artifact was built for task '" + artifact_task +
              "' but the task config is '" + task.name() + "'";
  } else if (artifact_hash != task.label_set().hash()) {
    problem = "artifact label set hash " + artifact_hash +
              " differs from task '" + task.name() + "' label set hash " +
              task.label_set().hash();
  }
  if (problem.empty()) return;
  if (!force) throw ConfigError(problem + " (pass --force to override)");
  err << "warning: " << problem << "\n";
}

std::map<std::string, std::string> load_label_map(const std::string& path) {
  try {
    return json::parse(read_file(path))
        .get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError("invalid label map '" + path + "': " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

int cmd_eval(const EvalFlags& f, const std::vector<std::string>& args,
             std::ostream& out, std::ostream& err) {
  Manifest manifest("eval", args);
  const Artifact artifact = load_artifact(f.artifact);
  const TaskSpec task = load_task_config(f.task);
  manifest.add_dataset("artifact", f.artifact);
  manifest.add_dataset("task", f.task);

  if (const auto* prompt = std::get_if<PromptArtifact>(&artifact)) {
    check_task_match(prompt->task_name, prompt->label_set_hash, task, f.force,
                     err);
  } else {
    const auto& plan = std::get<PlanArtifact>(artifact);
    check_task_match(plan.plan.task_name, plan.label_set_hash, task, f.force,
                     err);
  }
  EvalOptions options;
  options.parallelism = f.backend.parallelism;
  options.skip_failures = f.skip_failures;
  const fs::path dir = prepare_out(f.out);

  if (f.transfer) {
    const auto* prompt = std::get_if<PromptArtifact>(&artifact);
    if (!prompt) throw ConfigError("--transfer needs a fixed prompt artifact");
    if (f.target.empty() || f.target_pool.empty()) {
      throw ConfigError("--transfer needs --target and --target-pool");
    }
    const TaskSpec target = load_task_config(f.target);
    const Dataset test = load(f.test, target, DatasetRole::kTest);
    const Dataset target_pool =
        load(f.target_pool, target, DatasetRole::kTrainPool);
    manifest.add_dataset("target", f.target);
    manifest.add_dataset("test", f.test);
    manifest.add_dataset("target_pool", f.target_pool);
    std::optional<std::map<std::string, std::string>> label_map;
    if (!f.label_map.empty()) {
      label_map = load_label_map(f.label_map);
      manifest.add_dataset("label_map", f.label_map);
    }
    const BackendHandle backend = make_backend(f.backend);
    manifest.set_backend(backend);
    const TransferReport report = transfer_evaluate(
        *backend.backend, prompt->demos, target, test, target_pool, f.seed,
        label_map ? &*label_map : nullptr, options);
    manifest["config"] = {{"transfer", true},
                          {"source_task", task.name()},
                          {"target_task", target.name()}};
    manifest["seeds"]["baseline"] = f.seed;
    manifest["prompt_artifact"] = json::parse(read_file(f.artifact))
                                      .at("content_hash");
    manifest["metrics"] = {{"accuracy", report.transfer.accuracy},
                           {"macro_f1", report.transfer.macro_f1},
                           {"baseline_accuracy", report.baseline.accuracy},
                           {"baseline_macro_f1", report.baseline.macro_f1},
                           {"delta_accuracy", report.delta_accuracy},
                           {"delta_macro_f1", report.delta_macro_f1}};
    manifest["skipped_ids"] = report.transfer.skipped_ids;
    manifest.write_output(dir, "report.json", serialize(report.to_json()));
    manifest.write_output(dir, "report.csv", report.transfer.to_csv());
    manifest.write(dir, "eval.manifest.json");
    out << format_metric("accuracy", report.transfer.accuracy) << "\n"
        << format_metric("macro_f1", report.transfer.macro_f1) << "\n"
        << format_delta("delta_accuracy", report.delta_accuracy) << "\n"
        << format_delta("delta_macro_f1", report.delta_macro_f1) << "\n";
    return kExitOk;
  }

  const Dataset test = load(f.test, task, DatasetRole::kTest);
  manifest.add_dataset("test", f.test);
  const BackendHandle backend = make_backend(f.backend);
  manifest.set_backend(backend);
  std::optional<PromptSource> source;
  if (const auto* prompt = std::get_if<PromptArtifact>(&artifact)) {
    source.emplace(prompt->demos);
    manifest["config"] = {{"method", prompt->method}};
  } else {
    const auto& plan = std::get<PlanArtifact>(artifact).plan;
    const auto provider = make_embedding_provider(
        plan.provider_id, embedding_config(f.backend, f.embedding_model));
    source.emplace(std::make_shared<const Retriever>(
        plan, task, provider,
        std::max<std::size_t>(1, backend.backend->parallelism())));
    manifest["config"] = {{"method", to_string(plan.method)},
                          {"k", plan.k},
                          {"embeddings", plan.provider_id}};
  }
  const EvalReport report =
      evaluate(*backend.backend, task, *source, test, options);
  manifest["prompt_artifact"] =
      json::parse(read_file(f.artifact)).at("content_hash");
  manifest["metrics"] = {{"accuracy", report.accuracy},
                         {"macro_f1", report.macro_f1}};
  manifest["skipped_ids"] = report.skipped_ids;
  manifest.write_output(dir, "report.json", serialize(report.to_json()));
  manifest.write_output(dir, "report.csv", report.to_csv());
  manifest.write(dir, "eval.manifest.json");
  out << format_metric("accuracy", report.accuracy) << "\n"
      << format_metric("macro_f1", report.macro_f1) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

void write_report(Manifest& manifest, const fs::path& dir,
                  const AblationReport& report, std::ostream& out) {
  const std::string stem = "ablation-" + to_string(report.variant);
  const fs::path json_path =
      manifest.write_output(dir, stem + ".json", serialize(report.to_json()));
  out << "report=" << json_path.string() << "\n";
  if (!report.csv.empty()) {
    manifest.write_output(dir, stem + ".csv", report.csv);
  }
  if (!report.svg.empty()) {
    manifest.write_output(dir, stem + ".svg", report.svg);
  }
}

int cmd_ablate(const std::string& sub, const AblateFlags& f,
               const std::vector<std::string>& args, std::ostream& out) {
  Manifest manifest("ablate " + sub, args);
  const TaskSpec task = load_task_config(f.task);
  const Dataset test = load(f.test, task, DatasetRole::kTest);
  manifest.add_dataset("task", f.task);
  manifest.add_dataset("test", f.test);
  manifest["seeds"]["seed"] = f.loop.seed;
  EvalOptions eval_options;
  eval_options.parallelism = f.backend.parallelism;
  eval_options.skip_failures = f.loop.skip_failures;
  const fs::path dir = prepare_out(f.out);

  // Every variant except distance-with-artifact needs the pool.
  std::optional<Dataset> pool;
  if (!(sub == "distance" && !f.artifact.empty())) {
    if (f.pool.empty()) throw ConfigError("--pool is required");
    pool.emplace(load(f.pool, task, DatasetRole::kTrainPool));
    manifest.add_dataset("pool", f.pool);
  }
  const BackendHandle backend = make_backend(f.backend);
  manifest.set_backend(backend);
  const Backend& model = *backend.backend;

  if (sub == "iters") {
    ICRConfig config = loop_config(f.loop, f.backend);
    const IterationSweep sweep = ablate_iterations(
        model, task, *pool, test, config, f.max_iterations, eval_options);
    manifest["config"] = config.to_json();
    manifest["config"]["max_iterations"] = f.max_iterations;
    write_report(manifest, dir, to_report(sweep), out);
  } else if (sub == "bins") {
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < f.seed_count; ++i) {
      seeds.push_back(f.loop.seed + i);
    }
    const BinsResult result = ablate_misconfidence_bins(
        model, task, *pool, test, f.bins, f.loop.m, seeds, eval_options);
    manifest["config"] = {{"bins", f.bins}, {"m", f.loop.m}};
    manifest["seeds"]["per_bin"] = seeds;
    write_report(manifest, dir, to_report(result), out);
  } else if (sub == "variants") {
    const ICRConfig config = loop_config(f.loop, f.backend);
    const VariantsResult result =
        ablate_variants(model, task, *pool, test, config, eval_options);
    manifest["config"] = config.to_json();
    write_report(manifest, dir,
                 to_report(result, AblationVariant::kZeroShotInit), out);
    write_report(manifest, dir,
                 to_report(result, AblationVariant::kFullMisconfidence), out);
  } else if (sub == "distance") {
    DemonstrationSet demos;
    if (!f.artifact.empty()) {
      const Artifact artifact = load_artifact(f.artifact);
      const auto* prompt = std::get_if<PromptArtifact>(&artifact);
      if (!prompt) {
        throw ConfigError("distance analysis needs a fixed prompt artifact");
      }
      demos = prompt->demos;
      manifest.add_dataset("artifact", f.artifact);
    } else {
      const ICRConfig config = loop_config(f.loop, f.backend);
      demos = icr_select(model, task, *pool, config).demos;
      manifest["config"] = config.to_json();
    }
    const auto provider = make_embedding_provider(
        f.embeddings, embedding_config(f.backend, f.embedding_model));
    const DistanceResult result =
        distance_analysis(model, task, demos, test, *provider, eval_options);
    manifest["config"]["embeddings"] = provider->provider_id();
    write_report(manifest, dir, to_report(result), out);
  } else if (sub == "psi") {
    const ICRConfig config = loop_config(f.loop, f.backend);
    const PsiCaseStudy result = psi_case_study(
        model, task, *pool, test, config, f.histogram_bins, eval_options);
    manifest["config"] = config.to_json();
    manifest["config"]["histogram_bins"] = f.histogram_bins;
    write_report(manifest, dir, to_report(result), out);
  } else {
    throw ConfigError("unknown ablation '" + sub + "'");
  }
  manifest.write(dir, "ablate-" + sub + ".manifest.json");
  return kExitOk;
}

// ----------------------------------------------------------------- cache

int cmd_cache_stats(const CacheFlags& f, std::ostream& out) {
  const CacheStats stats = DiskCache(resolve_cache_dir(f.cache_dir)).stats();
  out << "entries=" << stats.entries << " bytes=" << stats.bytes << "\n";
  return kExitOk;
}

int cmd_cache_clear(const CacheFlags& f, std::ostream& out) {
  const fs::path dir = resolve_cache_dir(f.cache_dir);
  if (!f.yes) {
    throw ConfigError("refusing to clear cache '" + dir.string() +
                      "' without --yes");
  }
  const std::uint64_t removed = DiskCache(dir).clear();
  out << "removed=" << removed << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- errors

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const IngestionError*>(&e)) return "ingestion";
  if (dynamic_cast<const RenderError*>(&e)) return "render";
  // Subclasses of BackendError first.
  if (dynamic_cast<const ExtractionError*>(&e)) return "extraction";
  if (dynamic_cast<const ScoringError*>(&e)) return "scoring";
  if (dynamic_cast<const BackendError*>(&e)) return "backend";
  if (dynamic_cast<const LookupError*>(&e)) return "lookup";
  if (dynamic_cast<const ContractViolation*>(&e)) return "contract";
  return "internal";
}

void report_error(const std::exception& e, std::ostream& err) {
  json doc = {{"error", error_kind(e)}, {"message", e.what()}};
  if (const auto* scoring = dynamic_cast<const ScoringError*>(&e)) {
    doc["example_id"] = scoring->example_id();
  }
  err << doc.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app("In-context demonstration selection by misconfidence", "icr");
  app.require_subcommand(1);

  SelectFlags select;
  CLI::App* select_cmd =
      app.add_subcommand("select", "Choose demonstrations for a task");
  select_cmd->add_option("--method", select.method, "Selection method")
      ->check(CLI::IsMember({"icr", "uniform", "best-of-10", "kate", "ambig"}))
      ->capture_default_str();
  select_cmd->add_option("--task", select.task, "Task config (TOML or JSON)")
      ->required();
  select_cmd->add_option("--pool", select.pool, "Candidate pool file")
      ->required();
  select_cmd->add_option("--validation", select.validation,
                         "Validation file for best-of-10");
  select_cmd->add_option("--validation-size", select.validation_size,
                         "Validation cases for best-of-10")
      ->capture_default_str();
  select_cmd->add_option("--trials", select.trials, "best-of-10 trial count")
      ->capture_default_str();
  select_cmd->add_option("--metric", select.metric, "best-of-10 criterion")
      ->check(CLI::IsMember({"accuracy", "macro-f1"}))
      ->capture_default_str();
  select_cmd->add_option("--embeddings", select.embeddings,
                         "hashing, http or file:<path>")
      ->capture_default_str();
  select_cmd->add_option("--embedding-model", select.embedding_model,
                         "Model for --embeddings http")
      ->capture_default_str();
  select_cmd->add_option("--k", select.k,
                         "Retrieved demonstrations per query (default m)");
  select_cmd->add_flag("--farthest-last", select.farthest_last,
                       "Place the nearest retrieved example first");
  select_cmd->add_option("--out", select.out, "Output directory")
      ->capture_default_str();
  add_loop_flags(select_cmd, select.loop);
  add_backend_flags(select_cmd, select.backend);

  EvalFlags eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate a prompt artifact or plan");
  eval_cmd->add_option("--artifact", eval.artifact, "Artifact from select")
      ->required();
  eval_cmd->add_option("--task", eval.task, "Task config")->required();
  eval_cmd->add_option("--test", eval.test, "Test file")->required();
  eval_cmd->add_flag("--transfer", eval.transfer,
                     "Evaluate the prompt on another task");
  eval_cmd->add_option("--target", eval.target, "Target task config");
  eval_cmd->add_option("--target-pool", eval.target_pool,
                       "Target pool for the uniform baseline");
  eval_cmd->add_option("--label-map", eval.label_map,
                       "JSON object mapping source to target labels");
  eval_cmd->add_option("--seed", eval.seed, "Transfer baseline seed")
      ->capture_default_str();
  eval_cmd->add_option("--embedding-model", eval.embedding_model,
                       "Model for http embeddings")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Output directory")
      ->capture_default_str();
  eval_cmd->add_flag("--force", eval.force,
                     "Evaluate despite a task mismatch");
  eval_cmd->add_flag("--skip-failures", eval.skip_failures,
                     "Drop failing cases instead of aborting");
  add_backend_flags(eval_cmd, eval.backend);

  AblateFlags ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run an ablation");
  ablate_cmd->require_subcommand(1);
  std::map<std::string, CLI::App*> ablate_subs;
  const std::pair<const char*, const char*> ablations[] = {
      {"iters", "Accuracy after each refinement round"},
      {"bins", "Prompts drawn from misconfidence bins"},
      {"variants", "Zero-shot and full-misconfidence variants"},
      {"distance", "Embedding distance of changed predictions"},
      {"psi", "Misconfidence histogram of the candidate pool"}};
  for (const auto& [name, description] : ablations) {
    CLI::App* sub = ablate_cmd->add_subcommand(name, description);
    sub->add_option("--task", ablate.task, "Task config")->required();
    sub->add_option("--pool", ablate.pool, "Candidate pool file");
    sub->add_option("--test", ablate.test, "Test file")->required();
    sub->add_option("--out", ablate.out, "Output directory")
        ->capture_default_str();
    add_loop_flags(sub, ablate.loop);
    add_backend_flags(sub, ablate.backend);
    ablate_subs[name] = sub;
  }
  ablate_subs["iters"]
      ->add_option("--k", ablate.max_iterations, "Iterations to sweep")
      ->capture_default_str();
  ablate_subs["bins"]
      ->add_option("--bins", ablate.bins, "Misconfidence bins")
      ->capture_default_str();
  ablate_subs["bins"]
      ->add_option("--seeds", ablate.seed_count, "Prompts per bin")
      ->capture_default_str();
  ablate_subs["distance"]->add_option("--artifact", ablate.artifact,
                                      "Prompt artifact (default: run ICR)");
  ablate_subs["distance"]
      ->add_option("--embeddings", ablate.embeddings,
                   "hashing, http or file:<path>")
      ->capture_default_str();
  ablate_subs["distance"]
      ->add_option("--embedding-model", ablate.embedding_model,
                   "Model for --embeddings http")
      ->capture_default_str();
  ablate_subs["psi"]
      ->add_option("--hist-bins", ablate.histogram_bins, "Histogram bins")
      ->capture_default_str();

  CacheFlags cache;
  CLI::App* cache_cmd = app.add_subcommand("cache", "Inspect the cache");
  cache_cmd->require_subcommand(1);
  CLI::App* stats_cmd = cache_cmd->add_subcommand("stats", "Entry count");
  CLI::App* clear_cmd = cache_cmd->add_subcommand("clear", "Remove entries");
  for (CLI::App* sub : {stats_cmd, clear_cmd}) {
    sub->add_option("--cache-dir", cache.cache_dir,
                    "Cache directory (default $ICR_CACHE_DIR or "
                    "./.icr-cache)");
  }
  clear_cmd->add_flag("--yes", cache.yes, "Confirm removal");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (select_cmd->parsed()) return cmd_select(select, args, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, args, out, err);
    if (ablate_cmd->parsed()) {
      for (const auto& [name, sub] : ablate_subs) {
        if (sub->parsed()) return cmd_ablate(name, ablate, args, out);
      }
    }
    if (stats_cmd->parsed()) return cmd_cache_stats(cache, out);
    if (clear_cmd->parsed()) return cmd_cache_clear(cache, out);
    err << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    report_error(e, err);
    return kExitUsage;
  } catch (const std::exception& e) {
    report_error(e, err);
    return kExitFailure;
  }
}

}  // namespace icr::cli
