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

// Experiments around the selection loop: iteration sweeps, misconfidence
// binning, scoring/replacement variants, semantic-distance analysis, and the
// per-label misconfidence case study.

#ifndef ICR_ABLATION_H_
#define ICR_ABLATION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/backend.h"
#include "icr/embedding.h"
#include "icr/evaluation.h"
#include "icr/selection.h"
#include "icr/task_model.h"

namespace icr {

enum class AblationVariant {
  kIterationSweep,
  kMisconfidenceBins,
  kZeroShotInit,
  kFullMisconfidence,
  kDistanceAnalysis,
  kPsiCaseStudy,
};

std::string to_string(AblationVariant variant);

struct AblationReport {
  AblationVariant variant;
  nlohmann::json payload;
  std::string csv;  // tabular view of the payload
  std::string svg;  // empty when the variant has no plot

  nlohmann::json to_json() const;
};

// ------------------------------------------------------- iteration sweep

struct IterationPoint {
  int iteration = 0;  // 0 = initial random prompt
  std::vector<int> member_ids;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct IterationSweep {
  std::vector<IterationPoint> points;  // max_iterations + 1 entries
  IcrTrace trace;
};

IterationSweep ablate_iterations(const Backend& backend, const TaskSpec& task,
                                 const Dataset& pool, const Dataset& test,
                                 ICRConfig config, int max_iterations,
                                 const EvalOptions& eval_options = {});

AblationReport to_report(const IterationSweep& sweep);

// ------------------------------------------------- misconfidence bins

struct BinPrompt {
  std::uint64_t seed = 0;
  std::vector<int> member_ids;
  double mean_log_psi = 0.0;  // over the prompt's members
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct MisconfidenceBin {
  std::size_t index = 0;
  std::vector<int> example_ids;  // ascending misconfidence
  double lower_log_psi = 0.0;
  double upper_log_psi = 0.0;
  double mean_log_psi = 0.0;  // over the whole bin
  std::vector<BinPrompt> prompts;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
};

struct BinsResult {
  std::vector<MisconfidenceBin> bins;
};

// Scores the pool zero-shot, sorts ascending by misconfidence (ties by id)
// and cuts it into `bins` equal-count slices: bin b holds sorted positions
// [floor(b*N/bins), floor((b+1)*N/bins)). One m-demonstration prompt is
// drawn uniformly from each bin per seed and evaluated on `test`.
BinsResult ablate_misconfidence_bins(const Backend& backend,
                                     const TaskSpec& task, const Dataset& pool,
                                     const Dataset& test, std::size_t bins,
                                     std::size_t m,
                                     const std::vector<std::uint64_t>& seeds,
                                     const EvalOptions& eval_options = {});

AblationReport to_report(const BinsResult& result);

// ------------------------------------------------------------ variants

struct VariantOutcome {
  std::string name;
  std::vector<int> member_ids;
  std::vector<std::size_t> label_histogram;  // label order
  EvalReport report;
  double delta_accuracy = 0.0;  // versus standard ICR
  double delta_macro_f1 = 0.0;
};

struct VariantsResult {
  std::vector<std::string> labels;
  VariantOutcome standard;
  VariantOutcome zero_shot_init;
  VariantOutcome full_misconfidence;
};

// Standard ICR; ICR scored under an empty context; and the top-m candidates
// of a zero-shot ranking of the (capped) pool with no replacement step.
VariantsResult ablate_variants(const Backend& backend, const TaskSpec& task,
                               const Dataset& pool, const Dataset& test,
                               const ICRConfig& config,
                               const EvalOptions& eval_options = {});

// `which` is kZeroShotInit or kFullMisconfidence; the payload holds standard
// ICR and that variant.
AblationReport to_report(const VariantsResult& result, AblationVariant which);

// --------------------------------------------------- distance analysis

struct DistanceCase {
  int id = 0;
  std::string zero_shot;
  std::string few_shot;
  bool changed = false;
  double min_distance = 0.0;  // cosine distance to the nearest demonstration
};

struct DistanceResult {
  std::vector<DistanceCase> cases;
  std::vector<double> all_distances;
  std::vector<double> changed_distances;
  std::optional<double> ks;
};

DistanceResult distance_analysis(const Backend& backend, const TaskSpec& task,
                                 const DemonstrationSet& demos,
                                 const Dataset& test,
                                 const EmbeddingProvider& provider,
                                 const EvalOptions& eval_options = {});

AblationReport to_report(const DistanceResult& result);

// ---------------------------------------------------- psi case study

struct PsiCaseStudy {
  std::vector<std::string> labels;
  std::vector<double> bin_edges;  // histogram_bins + 1 edges over log psi
  // counts[label][bin]
  std::vector<std::vector<std::size_t>> counts;
  std::vector<double> mean_log_psi;  // per label; 0 for absent labels
  std::vector<std::size_t> scored;   // per label
  std::vector<int> initial_ids;
  std::vector<int> refined_ids;
  EvalReport before;
  EvalReport after;
};

// Histogram of candidate misconfidence under the initial prompt, split by
// gold label, plus test confusion before and after one refinement round.
PsiCaseStudy psi_case_study(const Backend& backend, const TaskSpec& task,
                            const Dataset& pool, const Dataset& test,
                            ICRConfig config, std::size_t histogram_bins = 10,
                            const EvalOptions& eval_options = {});

AblationReport to_report(const PsiCaseStudy& result);

// Minimal grouped bar chart. `series[s][c]` is the bar of series s in
// category c.
std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<std::string>& categories,
                                 const std::vector<std::string>& series_names,
                                 const std::vector<std::vector<double>>& series);

}  // namespace icr

#endif  // ICR_ABLATION_H_
