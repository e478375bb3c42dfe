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

#include "icr/baselines.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icr/errors.h"
#include "icr/evaluation.h"
#include "icr/random.h"
#include "icr/util.h"

namespace icr {

DemonstrationSet uniform_select(const Dataset& pool, const LabelSet& labels,
                                std::size_t m, std::uint64_t seed) {
  if (m > pool.size()) {
    throw ConfigError("m=" + std::to_string(m) + " exceeds pool size " +
                      std::to_string(pool.size()));
  }
  if (m < labels.size()) {
    throw ConfigError("m=" + std::to_string(m) +
                      " is smaller than the number of labels");
  }
  const auto quota = proportional_counts(pool.label_counts(labels), m);
  std::vector<std::vector<std::size_t>> by_label(labels.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    by_label[labels.index_of(pool.at(i).label)].push_back(i);
  }
  Rng rng(derive_seed(seed, "uniform"));
  std::vector<std::size_t> chosen;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    auto picked = rng.sample(by_label[l], quota[l]);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  rng.shuffle(chosen);
  DemonstrationSet demos;
  for (std::size_t i : chosen) demos.members.push_back(pool.at(i));
  demos.provenance = {"uniform", seed, 0};
  return demos;
}

BestOfNResult best_of_n_select(const Backend& backend, const TaskSpec& task,
                               const Dataset& pool, std::size_t m,
                               std::size_t trials, const Dataset& validation,
                               std::uint64_t seed, SelectionMetric metric) {
  if (trials < 1) throw ConfigError("best-of-n needs at least one trial");
  BestOfNResult result;
  for (std::size_t t = 0; t < trials; ++t) {
    DemonstrationSet demos =
        uniform_select(pool, task.label_set(), m, seed + t);
    demos.source_task = task.name();
    EvalReport report;
    try {
      report = evaluate(backend, task, PromptSource(demos), validation);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendError("best-of-n trial " + std::to_string(t) + ": " +
                         e.what());
    }
    const double score =
        metric == SelectionMetric::kAccuracy ? report.accuracy : report.macro_f1;
    result.trial_scores.push_back(score);
    result.trials.push_back(std::move(demos));
    if (t == 0 || score > result.trial_scores[result.best_trial]) {
      result.best_trial = t;
    }
  }
  result.demos = result.trials[result.best_trial];
  result.demos.provenance = {"best-of-" + std::to_string(trials), seed, 0};
  return result;
}

std::string to_string(RetrievalMethod method) {
  return method == RetrievalMethod::kKate ? "kate" : "ambig";
}

RetrievalMethod parse_retrieval_method(std::string_view text) {
  if (text == "kate") return RetrievalMethod::kKate;
  if (text == "ambig") return RetrievalMethod::kAmbig;
  throw ConfigError("unknown retrieval method '" + std::string(text) + "'");
}

void RetrievalPlan::validate() const {
  if (k < 1) throw ConfigError("retrieval k must be >= 1");
  if (k > pool.size()) {
    throw ConfigError("retrieval k=" + std::to_string(k) +
                      " exceeds pool size " + std::to_string(pool.size()));
  }
}

Retriever::Retriever(RetrievalPlan plan, const TaskSpec& task,
                     std::shared_ptr<const EmbeddingProvider> provider,
                     std::size_t parallelism)
    : plan_(std::move(plan)), provider_(std::move(provider)), task_(task) {
  plan_.validate();
  if (!provider_) throw ContractViolation("retriever needs a provider");
  pool_embeddings_.resize(plan_.pool.size());
  auto errors = parallel_for(plan_.pool.size(), parallelism, [&](std::size_t i) {
    const std::string text = task_.input_text(plan_.pool[i].fields);
    pool_embeddings_[i] = provider_->embed(
        {text, plan_.pool[i].id, DatasetRole::kTrainPool});
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<std::pair<std::size_t, double>> Retriever::neighbors(
    const EmbeddingVector& query) const {
  std::vector<std::pair<std::size_t, double>> out;
  std::vector<double> grid(pool_embeddings_.size());
  out.reserve(pool_embeddings_.size());
  for (std::size_t i = 0; i < pool_embeddings_.size(); ++i) {
    out.emplace_back(i, cosine_distance(query, pool_embeddings_[i]));
    // Mathematically equal distances can differ in the last bits; comparing
    // on a 1e-9 grid keeps the order transitive and lets the id decide.
    grid[i] = std::round(out.back().second * 1e9);
  }
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) {
    if (grid[a.first] != grid[b.first]) return grid[a.first] < grid[b.first];
    return plan_.pool[a.first].id < plan_.pool[b.first].id;
  });
  return out;
}

RetrievalResult Retriever::assemble(const std::vector<std::size_t>& nearest,
                                    RetrievalMethod method) const {
  RetrievalResult result;
  result.demos.source_task = plan_.task_name;
  result.demos.provenance = {to_string(method), 0, 0};
  for (std::size_t i : nearest) {
    result.demos.members.push_back(plan_.pool[i]);
  }
  if (plan_.nearest_last) {
    std::reverse(result.demos.members.begin(), result.demos.members.end());
  }
  return result;
}

RetrievalResult Retriever::kate(const Example& query, DatasetRole role) const {
  const std::string text = task_.input_text(query.fields);
  const auto ranked = neighbors(provider_->embed({text, query.id, role}));
  std::vector<std::size_t> nearest;
  for (std::size_t i = 0; i < plan_.k; ++i) nearest.push_back(ranked[i].first);
  return assemble(nearest, RetrievalMethod::kKate);
}

RetrievalResult Retriever::ambig(const Backend& backend, const TaskSpec& task,
                                 const Example& query, DatasetRole role) const {
  const LabelDistribution zero_shot =
      backend.label_distribution(task, {}, query.fields);
  zero_shot.validate();
  std::vector<std::size_t> order(zero_shot.labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return zero_shot.probs[a] > zero_shot.probs[b];
  });
  std::vector<std::string> ambiguity = {zero_shot.labels[order[0]],
                                        zero_shot.labels[order[1]]};
  const std::string text = task_.input_text(query.fields);
  const auto ranked = neighbors(provider_->embed({text, query.id, role}));
  std::vector<std::size_t> nearest;
  std::vector<bool> taken(ranked.size(), false);
  for (std::size_t r = 0; r < ranked.size() && nearest.size() < plan_.k; ++r) {
    const auto& label = plan_.pool[ranked[r].first].label;
    if (label == ambiguity[0] || label == ambiguity[1]) {
      nearest.push_back(ranked[r].first);
      taken[r] = true;
    }
  }
  std::size_t backfilled = 0;
  for (std::size_t r = 0; r < ranked.size() && nearest.size() < plan_.k; ++r) {
    if (!taken[r]) {
      nearest.push_back(ranked[r].first);
      ++backfilled;
    }
  }
  // Keep the final list ordered by distance even after backfilling.
  std::vector<std::size_t> position(plan_.pool.size());
  for (std::size_t r = 0; r < ranked.size(); ++r) position[ranked[r].first] = r;
  std::sort(nearest.begin(), nearest.end(), [&](std::size_t a, std::size_t b) {
    return position[a] < position[b];
  });
  RetrievalResult result = assemble(nearest, RetrievalMethod::kAmbig);
  result.backfilled = backfilled;
  result.ambiguity_labels = std::move(ambiguity);
  return result;
}

RetrievalResult Retriever::retrieve(const Backend& backend,
                                    const TaskSpec& task, const Example& query,
                                    DatasetRole role) const {
  return plan_.method == RetrievalMethod::kKate
             ? kate(query, role)
             : ambig(backend, task, query, role);
}

RetrievalResult kate_retrieve(const Retriever& retriever, const Example& query) {
  return retriever.kate(query);
}

RetrievalResult ambig_retrieve(const Retriever& retriever,
                               const Backend& backend, const TaskSpec& task,
                               const Example& query) {
  return retriever.ambig(backend, task, query);
}

}  // namespace icr
