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

// Shared fixtures for unit and acceptance tests: temporary directories,
// hand-built synthetic tasks, and an in-process OpenAI-compatible server.

#ifndef ICR_TESTS_SUPPORT_TEST_SUPPORT_H_
#define ICR_TESTS_SUPPORT_TEST_SUPPORT_H_

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/backend.h"
#include "icr/task_model.h"

namespace icr::testing {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

// Binary single-field task "Text: {text}\nAnswer: {label}".
TaskSpec binary_task(const std::string& name = "binary",
                     std::vector<std::string> labels = {"no", "yes"});

// Three-label task used by the 20-example oracle fixture.
TaskSpec mood_task();

Dataset make_dataset(const std::vector<std::pair<std::string, std::string>>&
                         text_label_pairs,
                     DatasetRole role = DatasetRole::kTrainPool);

// The fixed 20-example pool over mood_task(): four words per text drawn
// from per-label and shared vocabularies so misconfidence values vary.
Dataset oracle_pool();
SyntheticModelParams oracle_params();

// Imbalanced binary task. The pool holds 45 "no" examples with generic
// vocabulary and 15 "yes" examples spread over five topic clusters with
// disjoint vocabularies, interleaved by id. The model is biased towards
// "no", so a "yes" query is only answered correctly when a demonstration
// from its cluster is in the prompt. The test set has 20 "yes" queries
// (four per cluster) and 20 "no" queries.
struct ImbalancedFixture {
  TaskSpec task;
  Dataset pool;
  Dataset test;
  SyntheticModelParams params;
};
ImbalancedFixture imbalanced_fixture();

// Independent re-derivation of the synthetic model and the replacement
// rule, used as oracles. They share no code with the library.
struct TextLabel {
  std::string text;
  std::string label;
};
std::vector<double> reference_probs(const SyntheticModelParams& params,
                                    const std::vector<std::string>& labels,
                                    const std::vector<TextLabel>& demos,
                                    const std::string& query);
// log(max wrong) - log(gold), computed from the ratio directly.
double reference_log_psi(const std::vector<double>& probs,
                         std::size_t gold_index);
// Runs k rounds of the replacement rule from `initial_ids` over `pool`
// (candidates are every pool example not in the prompt) and returns the
// prompt after each round.
std::vector<std::vector<int>> reference_icr(const SyntheticModelParams& params,
                                            const std::vector<std::string>& labels,
                                            const Dataset& pool,
                                            std::vector<int> initial_ids,
                                            std::size_t n, int k);

// Writes a dataset as JSONL with one "text" field.
void write_jsonl(const std::filesystem::path& path, const Dataset& dataset);
// TOML config equivalent to binary_task(name, labels).
std::string binary_task_toml(const std::string& name,
                             const std::vector<std::string>& labels);

// Forwards to another backend and counts calls.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(std::shared_ptr<const Backend> inner)
      : inner_(std::move(inner)) {}

  BackendResponse query(const TaskSpec& task, std::span<const Example> demos,
                        const FieldMap& query_fields) const override {
    ++calls_;
    return inner_->query(task, demos, query_fields);
  }
  std::string backend_id() const override { return inner_->backend_id(); }
  nlohmann::json identity() const override { return inner_->identity(); }
  std::size_t parallelism() const override { return inner_->parallelism(); }

  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<const Backend> inner_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

// In-process OpenAI-compatible server on 127.0.0.1 with a random port.
// /v1/completions answers with first-token top_logprobs derived from the
// prompt hash over `tokens`; /v1/embeddings answers with a hashed vector.
class MockOpenAiServer {
 public:
  using Handler = std::function<nlohmann::json(const nlohmann::json& request)>;

  explicit MockOpenAiServer(std::vector<std::string> tokens = {" yes", " no"});
  ~MockOpenAiServer();
  MockOpenAiServer(const MockOpenAiServer&) = delete;
  MockOpenAiServer& operator=(const MockOpenAiServer&) = delete;

  std::string base_url() const;
  std::uint64_t completion_requests() const { return completions_.load(); }
  std::uint64_t embedding_requests() const { return embeddings_.load(); }

  // The next `count` completion requests answer with `status`.
  void fail_next(int count, int status);
  // Replaces the completions payload builder.
  void set_completion_handler(Handler handler);
  // Overrides the body of every completion response (e.g. malformed JSON).
  void set_raw_completion_body(std::string body);

  nlohmann::json last_request() const;
  std::string last_authorization() const;

  static nlohmann::json default_completion(const std::vector<std::string>& tokens,
                                           const std::string& prompt);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::uint64_t> completions_{0};
  std::atomic<std::uint64_t> embeddings_{0};
};

}  // namespace icr::testing

#endif  // ICR_TESTS_SUPPORT_TEST_SUPPORT_H_
