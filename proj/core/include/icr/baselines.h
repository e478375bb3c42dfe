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

// Comparison selectors: stratified uniform sampling, best-of-N sampling on a
// validation split, and the per-query retrieval methods KATE (nearest
// neighbors) and AMBIG (nearest neighbors among candidates whose gold label
// is one of the query's top-2 zero-shot predictions).

#ifndef ICR_BASELINES_H_
#define ICR_BASELINES_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/backend.h"
#include "icr/embedding.h"
#include "icr/task_model.h"

namespace icr {

// Label-proportional draw of m examples, shuffled.
DemonstrationSet uniform_select(const Dataset& pool, const LabelSet& labels,
                                std::size_t m, std::uint64_t seed);

enum class SelectionMetric { kAccuracy, kMacroF1 };

struct BestOfNResult {
  DemonstrationSet demos;
  std::size_t best_trial = 0;
  std::vector<double> trial_scores;
  std::vector<DemonstrationSet> trials;
};

// Trial t draws uniform_select(pool, m, seed + t); the trial with the highest
// validation metric wins, ties to the lowest trial index.
BestOfNResult best_of_n_select(const Backend& backend, const TaskSpec& task,
                               const Dataset& pool, std::size_t m,
                               std::size_t trials, const Dataset& validation,
                               std::uint64_t seed,
                               SelectionMetric metric = SelectionMetric::kAccuracy);

enum class RetrievalMethod { kKate, kAmbig };
std::string to_string(RetrievalMethod method);
RetrievalMethod parse_retrieval_method(std::string_view text);

// A per-query selection rule. Reusable across test sets.
struct RetrievalPlan {
  RetrievalMethod method = RetrievalMethod::kKate;
  std::size_t k = 16;
  std::string provider_id = "hashing";
  std::string task_name;
  std::vector<Example> pool;
  // Nearest demonstration placed last, right before the query.
  bool nearest_last = true;

  void validate() const;
};

struct RetrievalResult {
  DemonstrationSet demos;
  // AMBIG only: demonstrations taken from outside the ambiguity labels.
  std::size_t backfilled = 0;
  std::vector<std::string> ambiguity_labels;
};

// Holds a plan plus the pool embeddings, computed once at construction.
class Retriever {
 public:
  Retriever(RetrievalPlan plan, const TaskSpec& task,
            std::shared_ptr<const EmbeddingProvider> provider,
            std::size_t parallelism = 1);

  const RetrievalPlan& plan() const { return plan_; }

  // `query` carries input fields and an id (its label is ignored). `role`
  // tells file-backed providers which id space the query lives in.
  RetrievalResult kate(const Example& query,
                       DatasetRole role = DatasetRole::kTest) const;
  RetrievalResult ambig(const Backend& backend, const TaskSpec& task,
                        const Example& query,
                        DatasetRole role = DatasetRole::kTest) const;
  // Dispatches on plan().method.
  RetrievalResult retrieve(const Backend& backend, const TaskSpec& task,
                           const Example& query,
                           DatasetRole role = DatasetRole::kTest) const;

  // Pool indices sorted by ascending cosine distance to `query`, with their
  // distances. Distances are compared after rounding to a 1e-9 grid so that
  // rounding noise cannot reorder equal texts; ties go to the lower id.
  std::vector<std::pair<std::size_t, double>> neighbors(
      const EmbeddingVector& query) const;

 private:
  RetrievalResult assemble(const std::vector<std::size_t>& nearest_first,
                           RetrievalMethod method) const;

  RetrievalPlan plan_;
  std::shared_ptr<const EmbeddingProvider> provider_;
  TaskSpec task_;
  std::vector<EmbeddingVector> pool_embeddings_;
};

// Convenience wrappers matching the single-call shape.
RetrievalResult kate_retrieve(const Retriever& retriever, const Example& query);
RetrievalResult ambig_retrieve(const Retriever& retriever,
                               const Backend& backend, const TaskSpec& task,
                               const Example& query);

}  // namespace icr

#endif  // ICR_BASELINES_H_
