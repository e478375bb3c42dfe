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

#include "icr/selection.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "icr/errors.h"
#include "icr/random.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

MisconfidenceScore misconfidence(const LabelDistribution& dist,
                                 std::string_view gold, int example_id) {
  if (dist.labels.size() < 2 || dist.labels.size() != dist.probs.size()) {
    throw ContractViolation("misconfidence needs at least two labels");
  }
  std::optional<std::size_t> gold_index;
  double best_wrong = -1.0;
  for (std::size_t i = 0; i < dist.labels.size(); ++i) {
    if (dist.labels[i] == gold) {
      gold_index = i;
    } else {
      best_wrong = std::max(best_wrong, dist.probs[i]);
    }
  }
  if (!gold_index) {
    throw ContractViolation("gold label '" + std::string(gold) +
                            "' is not in the distribution");
  }
  return {std::log(best_wrong) - std::log(dist.probs[*gold_index]),
          example_id};
}

void rank_candidates(std::vector<RankedCandidate>& candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.score.log_value != b.score.log_value) {
                return a.score.log_value > b.score.log_value;
              }
              return a.example.id < b.example.id;
            });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].rank = i + 1;
  }
}

ScoredPool score_pool(const Backend& backend, const TaskSpec& task,
                      std::span<const Example> pool,
                      const DemonstrationSet& context,
                      const ScoreOptions& options) {
  std::unordered_set<int> context_ids;
  for (const auto& m : context.members) context_ids.insert(m.id);
  for (const auto& c : pool) {
    if (context_ids.contains(c.id)) {
      throw ContractViolation("candidate " + std::to_string(c.id) +
                              " is also a demonstration");
    }
  }
  std::vector<MisconfidenceScore> scores(pool.size());
  const std::size_t parallelism =
      options.parallelism ? options.parallelism : backend.parallelism();
  auto errors = parallel_for(pool.size(), parallelism, [&](std::size_t i) {
    const auto dist =
        backend.label_distribution(task, context.members, pool[i].fields);
    dist.validate();
    scores[i] = misconfidence(dist, pool[i].label, pool[i].id);
  });
  ScoredPool out;
  out.ranked.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (errors[i]) {
      // Configuration errors are never skippable: every candidate would fail.
      try {
        std::rethrow_exception(errors[i]);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        if (!options.skip_failures) throw ScoringError(pool[i].id, e.what());
      }
      out.skipped_ids.push_back(pool[i].id);
      continue;
    }
    out.ranked.push_back({pool[i], scores[i], 0});
  }
  rank_candidates(out.ranked);
  return out;
}

std::string to_string(InitMode mode) {
  return mode == InitMode::kUniform ? "uniform" : "stratified";
}

InitMode parse_init_mode(std::string_view text) {
  if (text == "uniform") return InitMode::kUniform;
  if (text == "stratified") return InitMode::kStratified;
  throw ConfigError("unknown init mode '" + std::string(text) + "'");
}

void ICRConfig::validate() const {
  if (n < 1 || n > m) {
    throw ConfigError("replacement count n=" + std::to_string(n) +
                      " must satisfy 1 <= n <= m=" + std::to_string(m));
  }
  if (k < 1) throw ConfigError("iteration count k must be >= 1");
  if (pool_cap && *pool_cap < m + n) {
    throw ConfigError("pool cap " + std::to_string(*pool_cap) +
                      " must be at least m + n = " + std::to_string(m + n));
  }
}

json ICRConfig::to_json() const {
  return {{"m", m},
          {"n", n},
          {"k", k},
          {"seed", seed},
          {"pool_cap", pool_cap ? json(*pool_cap) : json(nullptr)},
          {"init_mode", to_string(init_mode)},
          {"scoring_context", scoring_context == ScoringContext::kZeroShot
                                  ? "zero-shot"
                                  : "current-prompt"}};
}

DemonstrationSet icr_init(const Dataset& pool, const LabelSet& labels,
                          const ICRConfig& config) {
  if (pool.size() < config.m) {
    throw ConfigError("pool of " + std::to_string(pool.size()) +
                      " examples is smaller than m=" +
                      std::to_string(config.m));
  }
  Rng rng(derive_seed(config.seed, "icr-init"));
  std::vector<std::size_t> indices;
  if (config.init_mode == InitMode::kUniform) {
    std::vector<std::size_t> all(pool.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    indices = rng.sample(std::move(all), config.m);
  } else {
    const auto quota =
        proportional_counts(pool.label_counts(labels), config.m);
    std::vector<std::vector<std::size_t>> by_label(labels.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
      by_label[labels.index_of(pool.at(i).label)].push_back(i);
    }
    for (std::size_t l = 0; l < labels.size(); ++l) {
      auto picked = rng.sample(by_label[l], quota[l]);
      indices.insert(indices.end(), picked.begin(), picked.end());
    }
    rng.shuffle(indices);
  }
  DemonstrationSet demos;
  for (std::size_t i : indices) demos.members.push_back(pool.at(i));
  demos.provenance = {"icr-init", config.seed, 0};
  return demos;
}

RefineResult icr_refine(const DemonstrationSet& demos,
                        std::span<const RankedCandidate> ranked,
                        std::size_t n) {
  if (ranked.size() < n) {
    throw ContractViolation("only " + std::to_string(ranked.size()) +
                            " ranked candidates for n=" + std::to_string(n));
  }
  if (n > demos.members.size()) {
    throw ContractViolation("n exceeds the number of demonstrations");
  }
  std::unordered_set<int> member_ids;
  for (const auto& m : demos.members) member_ids.insert(m.id);
  RefineResult out;
  out.demos.source_task = demos.source_task;
  out.demos.provenance = demos.provenance;
  ++out.demos.provenance.iterations;
  for (std::size_t i = 0; i < n; ++i) {
    if (member_ids.contains(ranked[i].example.id)) {
      throw ContractViolation("candidate " +
                              std::to_string(ranked[i].example.id) +
                              " is already a demonstration");
    }
    out.demos.members.push_back(ranked[i].example);
  }
  for (std::size_t i = n; i < demos.members.size(); ++i) {
    out.demos.members.push_back(demos.members[i]);
  }
  out.replaced.assign(demos.members.begin(),
                      demos.members.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

json IcrTrace::to_json() const {
  json iterations_json = json::array();
  for (const auto& it : iterations) {
    iterations_json.push_back({{"iteration", it.iteration},
                               {"member_ids", it.member_ids},
                               {"selected_ids", it.selected_ids},
                               {"replaced_ids", it.replaced_ids},
                               {"skipped_ids", it.skipped_ids},
                               {"scored", it.scored},
                               {"max_log_psi", it.max_log_psi},
                               {"mean_log_psi", it.mean_log_psi},
                               {"min_log_psi", it.min_log_psi}});
  }
  return {{"initial_member_ids", initial_member_ids},
          {"initial_pool_size", initial_pool_ids.size()},
          {"iterations", iterations_json}};
}

Dataset cap_pool(const Dataset& pool, const LabelSet& labels,
                 const ICRConfig& config) {
  if (config.pool_cap && pool.size() > *config.pool_cap) {
    return stratified_subsample(pool, labels, *config.pool_cap,
                                derive_seed(config.seed, "pool-cap"));
  }
  return pool;
}

namespace {

std::vector<int> ids_of(std::span<const Example> examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.id);
  return out;
}

}  // namespace

IcrResult icr_run(const Backend& backend, const TaskSpec& task,
                  DemonstrationSet initial, std::vector<Example> candidates,
                  const ICRConfig& config) {
  config.validate();
  if (initial.members.size() != config.m) {
    throw ContractViolation("initial prompt has " +
                            std::to_string(initial.members.size()) +
                            " members, expected m=" + std::to_string(config.m));
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  IcrResult result;
  result.trace.initial_member_ids = initial.ids();
  result.trace.initial_pool_ids = ids_of(candidates);
  DemonstrationSet current = std::move(initial);
  current.source_task = task.name();
  const DemonstrationSet empty_context{{}, task.name(), {}};
  for (int round = 1; round <= config.k; ++round) {
    const DemonstrationSet& context =
        config.scoring_context == ScoringContext::kZeroShot ? empty_context
                                                            : current;
    ScoredPool scored =
        score_pool(backend, task, candidates, context, config.score_options);
    if (scored.ranked.size() < config.n) {
      throw ConfigError("only " + std::to_string(scored.ranked.size()) +
                        " scored candidates left for n=" +
                        std::to_string(config.n));
    }
    RefineResult refined = icr_refine(current, scored.ranked, config.n);

    std::unordered_set<int> selected;
    for (std::size_t i = 0; i < config.n; ++i) {
      selected.insert(scored.ranked[i].example.id);
    }
    std::vector<Example> next_pool;
    next_pool.reserve(candidates.size());
    for (auto& c : candidates) {
      if (!selected.contains(c.id)) next_pool.push_back(std::move(c));
    }
    for (auto& r : refined.replaced) next_pool.push_back(r);
    std::sort(next_pool.begin(), next_pool.end(),
              [](const Example& a, const Example& b) { return a.id < b.id; });
    candidates = std::move(next_pool);

    IterationRecord record;
    record.iteration = round;
    record.member_ids = refined.demos.ids();
    for (std::size_t i = 0; i < config.n; ++i) {
      record.selected_ids.push_back(scored.ranked[i].example.id);
    }
    record.replaced_ids = ids_of(refined.replaced);
    record.pool_ids = ids_of(candidates);
    record.skipped_ids = scored.skipped_ids;
    record.scored = scored.ranked.size();
    if (!scored.ranked.empty()) {
      double sum = 0.0;
      for (const auto& rc : scored.ranked) sum += rc.score.log_value;
      record.max_log_psi = scored.ranked.front().score.log_value;
      record.min_log_psi = scored.ranked.back().score.log_value;
      record.mean_log_psi = sum / static_cast<double>(scored.ranked.size());
    }
    result.trace.iterations.push_back(std::move(record));
    current = std::move(refined.demos);
  }
  current.provenance = {"icr", config.seed, config.k};
  result.demos = std::move(current);
  return result;
}

IcrResult icr_select(const Backend& backend, const TaskSpec& task,
                     const Dataset& pool, const ICRConfig& config) {
  config.validate();
  const Dataset capped = cap_pool(pool, task.label_set(), config);
  if (capped.size() < config.m + config.n) {
    throw ConfigError("pool of " + std::to_string(capped.size()) +
                      " examples is smaller than m + n = " +
                      std::to_string(config.m + config.n));
  }
  DemonstrationSet initial = icr_init(capped, task.label_set(), config);
  std::unordered_set<int> member_ids;
  for (const auto& m : initial.members) member_ids.insert(m.id);
  std::vector<Example> candidates;
  for (const auto& e : capped.examples()) {
    if (!member_ids.contains(e.id)) candidates.push_back(e);
  }
  return icr_run(backend, task, std::move(initial), std::move(candidates),
                 config);
}

}  // namespace icr
