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

// Model backends: anything that turns (task, demonstrations, query) into a
// probability per task label.

#ifndef ICR_BACKEND_H_
#define ICR_BACKEND_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/task_model.h"

namespace icr {

enum class DistributionSource { kHttp, kSynthetic, kCache };

std::string to_string(DistributionSource source);
DistributionSource parse_distribution_source(std::string_view text);

// p(label | prompt), restricted to and renormalized over the task labels.
// probs[i] belongs to labels[i]; all entries are > 0 and sum to 1.
struct LabelDistribution {
  std::vector<std::string> labels;
  std::vector<double> probs;
  DistributionSource source = DistributionSource::kSynthetic;

  double prob(std::string_view label) const;
  // Index of the highest probability; ties go to the earliest label.
  std::size_t argmax() const;
  // Checks full support, positivity and sum-to-one within 1e-9.
  void validate() const;

  // Numerically stable softmax over per-label scores.
  static LabelDistribution from_scores(std::vector<std::string> labels,
                                       std::span<const double> scores,
                                       DistributionSource source);
};

struct BackendResponse {
  LabelDistribution distribution;
  // Verbatim provider payload; empty for backends without one.
  std::string raw;
};

// Thread-safe: implementations must tolerate concurrent query() calls.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendResponse query(const TaskSpec& task,
                                std::span<const Example> demos,
                                const FieldMap& query_fields) const = 0;

  // Short kind tag: "http", "synthetic", ...
  virtual std::string backend_id() const = 0;
  // Model name, endpoint and decoding parameters. Feeds cache keys and
  // run manifests, so it must be stable across runs.
  virtual nlohmann::json identity() const = 0;
  // Upper bound on concurrent query() calls worth issuing.
  virtual std::size_t parallelism() const { return 1; }

  LabelDistribution label_distribution(const TaskSpec& task,
                                       std::span<const Example> demos,
                                       const FieldMap& query_fields) const {
    return query(task, demos, query_fields).distribution;
  }
};

// ------------------------------------------------------------- Synthetic

struct SyntheticModelParams {
  std::map<std::string, double> bias;  // missing labels default to 0
  double alpha = 4.0;
  double temperature = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticModelParams from_json(const nlohmann::json& j);
};

// Lowercased maximal runs of ASCII letters and digits.
std::set<std::string> tokenize(std::string_view text);

// |a ∩ b| / |a ∪ b|; 0 when both are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Deterministic prototype classifier. Label y scores
//   bias[y] + alpha * max{ jaccard(query, demo) : demo labeled y }
// (an empty max is 0) and the distribution is softmax(score / temperature).
// `demo_texts[i]` is the input text of a demonstration with `demo_labels[i]`.
LabelDistribution synthetic_score(const SyntheticModelParams& params,
                                  std::span<const std::string> demo_texts,
                                  std::span<const std::string> demo_labels,
                                  std::string_view query_text,
                                  const LabelSet& label_set);

class SyntheticBackend : public Backend {
 public:
  explicit SyntheticBackend(SyntheticModelParams params);

  BackendResponse query(const TaskSpec& task, std::span<const Example> demos,
                        const FieldMap& query_fields) const override;
  std::string backend_id() const override { return "synthetic"; }
  nlohmann::json identity() const override;

  const SyntheticModelParams& params() const { return params_; }

 private:
  SyntheticModelParams params_;
};

// ------------------------------------------------------------------ HTTP

// One entry of the first generated token's top-k alternatives.
struct TokenLogprob {
  std::string token;
  double logprob;
};

// Matches verbalizers against top-k first-token logprobs. Tokens are
// normalized with the label set's rule; several tokens that normalize to the
// same verbalizer are combined with log-sum-exp. Unmatched labels get
// (lowest matched logprob - 10). Throws ExtractionError when nothing matches.
LabelDistribution distribution_from_top_logprobs(
    std::span<const TokenLogprob> top, const LabelSet& label_set,
    std::string_view raw_response = {});

// Pulls choices[0].logprobs.top_logprobs[0] out of an OpenAI-style
// completions response body.
std::vector<TokenLogprob> parse_completion_top_logprobs(std::string_view body);

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string model = "gpt-3.5-turbo-instruct";
  std::string api_key;  // sent as a bearer token when non-empty
  int top_logprobs = 20;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::seconds timeout{60};
  std::size_t parallelism = 8;
};

// OpenAI-compatible POST /v1/completions with max_tokens=1, temperature=0 and
// logprobs=k. Transport errors, 429 and 5xx are retried with jittered
// exponential backoff; any other 4xx is a ConfigError.
class HttpCompletionsBackend : public Backend {
 public:
  explicit HttpCompletionsBackend(HttpBackendConfig config);

  BackendResponse query(const TaskSpec& task, std::span<const Example> demos,
                        const FieldMap& query_fields) const override;
  std::string backend_id() const override { return "http"; }
  nlohmann::json identity() const override;
  std::size_t parallelism() const override { return config_.parallelism; }

  // Scores an already rendered prompt.
  BackendResponse score_prompt(const std::string& prompt_text,
                               const LabelSet& label_set) const;

  // Raw request/response with retries; shared with the embeddings client.
  std::string post_json(const std::string& path,
                        const nlohmann::json& body) const;

  std::uint64_t requests_sent() const { return requests_sent_.load(); }

 private:
  HttpBackendConfig config_;
  mutable std::atomic<std::uint64_t> requests_sent_{0};
};

// Base URL split into "scheme://host[:port]" and a path prefix ("" or
// "/something" without trailing slash).
std::pair<std::string, std::string> split_base_url(std::string_view base_url);

}  // namespace icr

#endif  // ICR_BACKEND_H_
