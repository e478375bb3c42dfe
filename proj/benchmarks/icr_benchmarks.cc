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


// Microbenchmarks for the hot paths: candidate ranking, synthetic scoring,
// hashing embeddings and nearest-neighbor retrieval.

#include <memory>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "icr/backend.h"
#include "icr/baselines.h"
#include "icr/embedding.h"
#include "icr/random.h"
#include "icr/selection.h"
#include "icr/task_model.h"

namespace icr {
namespace {

const std::vector<std::string> kVocab = {
    "river", "stone", "cloud", "ember", "frost", "maple", "cedar", "dune",
    "grove", "harbor", "island", "jade", "lotus", "meadow", "north", "opal"};

std::string random_text(Rng& rng, std::size_t words) {
  std::string text;
  for (std::size_t w = 0; w < words; ++w) {
    text += (w ? " " : "") + kVocab[rng.below(kVocab.size())];
  }
  return text;
}

TaskSpec binary_task() {
  return TaskSpec("bench", LabelSet({"no", "yes"}, {}),
                  "Text: {text}\nAnswer: {label}");
}

std::vector<Example> random_pool(std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> pool;
  for (std::size_t i = 0; i < size; ++i) {
    pool.push_back({static_cast<int>(i), {{"text", random_text(rng, 8)}},
                    rng.below(2) ? "yes" : "no"});
  }
  return pool;
}

void BM_RankCandidates(benchmark::State& state) {
  Rng rng(1);
  std::vector<RankedCandidate> base;
  for (int i = 0; i < state.range(0); ++i) {
    const double p = rng.uniform();
    const LabelDistribution dist{{"no", "yes"}, {p, 1.0 - p},
                                 DistributionSource::kSynthetic};
    base.push_back({{i, {{"text", "x"}}, "yes"}, misconfidence(dist, "yes", i), 0});
  }
  for (auto _ : state) {
    auto ranked = base;
    rank_candidates(ranked);
    benchmark::DoNotOptimize(ranked.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RankCandidates)->Range(64, 16384);

void BM_SyntheticScore(benchmark::State& state) {
  Rng rng(2);
  const LabelSet labels({"no", "yes"}, {});
  std::vector<std::string> texts, demo_labels;
  for (int i = 0; i < state.range(0); ++i) {
    texts.push_back(random_text(rng, 8));
    demo_labels.push_back(i % 2 ? "yes" : "no");
  }
  const std::string query = random_text(rng, 8);
  const SyntheticModelParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        synthetic_score(params, texts, demo_labels, query, labels));
  }
}
BENCHMARK(BM_SyntheticScore)->RangeMultiplier(2)->Range(4, 32);

void BM_HashingEmbed(benchmark::State& state) {
  Rng rng(3);
  const std::string text = random_text(rng, static_cast<std::size_t>(state.range(0)));
  const HashingEmbedding provider;
  for (auto _ : state) {
    benchmark::DoNotOptimize(provider.embed({text, std::nullopt, DatasetRole::kTest}));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_HashingEmbed)->Range(8, 512);

void BM_KateRetrieve(benchmark::State& state) {
  const TaskSpec task = binary_task();
  const auto pool = random_pool(static_cast<std::size_t>(state.range(0)), 4);
  const Retriever retriever({RetrievalMethod::kKate, 16, "hashing", "bench", pool},
                            task, std::make_shared<HashingEmbedding>());
  Rng rng(5);
  const Example query{-1, {{"text", random_text(rng, 8)}}, ""};
  for (auto _ : state) {
    benchmark::DoNotOptimize(kate_retrieve(retriever, query));
  }
}
BENCHMARK(BM_KateRetrieve)->Range(128, 8192);

}  // namespace
}  // namespace icr

BENCHMARK_MAIN();
