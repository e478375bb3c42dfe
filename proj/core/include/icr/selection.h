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

// Misconfidence scoring and the In-Context Reflection loop.
//
// Misconfidence of a labeled example under a context is the ratio
//
//   max_{y != gold} p(y | x, context) / p(gold | x, context)
//
// kept here as its logarithm. ICR starts from m randomly drawn
// demonstrations and, for k rounds, scores every remaining candidate under
// the current prompt, ranks candidates by descending misconfidence, puts the
// top n in front of the prompt in place of its first n members, and returns
// the displaced members to the candidate pool.

#ifndef ICR_SELECTION_H_
#define ICR_SELECTION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/backend.h"
#include "icr/task_model.h"

namespace icr {

struct MisconfidenceScore {
  // log(max_{y != gold} p(y)) - log(p(gold)). Positive means some wrong
  // label beats the gold one.
  double log_value = 0.0;
  int example_id = 0;
};

// Throws ContractViolation when `gold` is not in the distribution.
MisconfidenceScore misconfidence(const LabelDistribution& dist,
                                 std::string_view gold, int example_id = 0);

struct RankedCandidate {
  Example example;
  MisconfidenceScore score;
  std::size_t rank = 0;  // 1-based
};

// Descending log_value, ascending example id on ties; assigns ranks.
void rank_candidates(std::vector<RankedCandidate>& candidates);

struct ScoreOptions {
  // 0 uses backend.parallelism().
  std::size_t parallelism = 0;
  // Drop candidates whose scoring failed instead of failing the call.
  bool skip_failures = false;
};

struct ScoredPool {
  std::vector<RankedCandidate> ranked;
  std::vector<int> skipped_ids;
};

// One backend call per candidate, issued concurrently; reduction happens in
// candidate order afterwards so results never depend on completion order.
ScoredPool score_pool(const Backend& backend, const TaskSpec& task,
                      std::span<const Example> pool,
                      const DemonstrationSet& context,
                      const ScoreOptions& options = {});

enum class InitMode { kUniform, kStratified };
std::string to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

// Which prompt the candidates are scored under in each round.
enum class ScoringContext { kCurrentPrompt, kZeroShot };

struct ICRConfig {
  std::size_t m = 16;
  std::size_t n = 8;
  int k = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> pool_cap = 500;
  InitMode init_mode = InitMode::kUniform;
  ScoringContext scoring_context = ScoringContext::kCurrentPrompt;
  ScoreOptions score_options;

  // 1 <= n <= m, k >= 1, pool_cap >= m + n. Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
};

// m examples drawn from the pool without replacement (uniformly, or
// label-proportionally), in a seed-determined random order.
DemonstrationSet icr_init(const Dataset& pool, const LabelSet& labels,
                          const ICRConfig& config);

struct RefineResult {
  DemonstrationSet demos;
  std::vector<Example> replaced;
};

// New members: the top n candidates in rank order, then the previous members
// from position n+1 on in their previous order. The first n previous members
// are returned as `replaced`.
RefineResult icr_refine(const DemonstrationSet& demos,
                        std::span<const RankedCandidate> ranked, std::size_t n);

struct IterationRecord {
  int iteration = 0;  // 1-based round that produced `member_ids`
  std::vector<int> member_ids;
  std::vector<int> selected_ids;
  std::vector<int> replaced_ids;
  std::vector<int> pool_ids;  // candidate pool after the round, by id
  std::vector<int> skipped_ids;
  std::size_t scored = 0;
  double max_log_psi = 0.0;
  double mean_log_psi = 0.0;
  double min_log_psi = 0.0;
};

struct IcrTrace {
  std::vector<int> initial_member_ids;
  std::vector<int> initial_pool_ids;
  std::vector<IterationRecord> iterations;

  nlohmann::json to_json() const;
};

struct IcrResult {
  DemonstrationSet demos;
  IcrTrace trace;
};

// Caps the pool with a stratified subsample when it exceeds config.pool_cap
// (seeded from config.seed).
Dataset cap_pool(const Dataset& pool, const LabelSet& labels,
                 const ICRConfig& config);

IcrResult icr_select(const Backend& backend, const TaskSpec& task,
                     const Dataset& pool, const ICRConfig& config);

// Runs the loop from an explicit starting prompt and candidate pool. The
// candidate pool must exclude the starting members.
IcrResult icr_run(const Backend& backend, const TaskSpec& task,
                  DemonstrationSet initial, std::vector<Example> candidates,
                  const ICRConfig& config);

}  // namespace icr

#endif  // ICR_SELECTION_H_
