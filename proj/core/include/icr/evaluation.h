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

#ifndef ICR_EVALUATION_H_
#define ICR_EVALUATION_H_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "icr/backend.h"
#include "icr/baselines.h"
#include "icr/task_model.h"

namespace icr {

// Either one fixed prompt or a per-query retrieval rule.
class PromptSource {
 public:
  explicit PromptSource(DemonstrationSet demos) : source_(std::move(demos)) {}
  explicit PromptSource(std::shared_ptr<const Retriever> retriever)
      : source_(std::move(retriever)) {}

  bool is_fixed() const { return source_.index() == 0; }
  const DemonstrationSet& demos() const {
    return std::get<DemonstrationSet>(source_);
  }
  const Retriever& retriever() const {
    return *std::get<std::shared_ptr<const Retriever>>(source_);
  }

  // Demonstrations used for `query`.
  DemonstrationSet demos_for(const Backend& backend, const TaskSpec& task,
                             const Example& query, DatasetRole role) const;

  // SHA-256 over the fixed members or over the retrieval plan.
  std::string hash() const;

 private:
  std::variant<DemonstrationSet, std::shared_ptr<const Retriever>> source_;
};

// argmax over the task labels; ties go to the earlier label.
std::string predict(const Backend& backend, const TaskSpec& task,
                    const PromptSource& source, const Example& query,
                    DatasetRole role = DatasetRole::kTest);

struct LabelMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Prediction {
  int id = 0;
  std::string gold;
  std::string predicted;
};

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::string> labels;
  std::vector<LabelMetrics> per_label;
  // confusion[gold][predicted], indexed in label order.
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t n_cases = 0;
  std::string prompt_hash;
  std::vector<Prediction> predictions;
  std::vector<int> skipped_ids;

  nlohmann::json to_json() const;
  // label,precision,recall,f1,support rows plus a header.
  std::string to_csv() const;
};

// Pure metric computation. Labels with no support and no predictions get
// precision = recall = f1 = 0 and still count in the macro average.
EvalReport compute_report(const std::vector<std::string>& labels,
                          const std::vector<Prediction>& predictions,
                          std::string prompt_hash = {});

struct EvalOptions {
  std::size_t parallelism = 0;  // 0 uses backend.parallelism()
  bool skip_failures = false;
};

EvalReport evaluate(const Backend& backend, const TaskSpec& task,
                    const PromptSource& source, const Dataset& test,
                    const EvalOptions& options = {});

struct TransferReport {
  EvalReport transfer;
  EvalReport baseline;  // same-task uniform prompt on the target task
  double delta_accuracy = 0.0;
  double delta_macro_f1 = 0.0;

  nlohmann::json to_json() const;
};

// Re-labels source demonstrations for the target task. Labels map through
// `label_map` when given; otherwise each must already be a target label.
// Every target template field must exist on the demonstrations.
DemonstrationSet reverbalize(const DemonstrationSet& source,
                             const TaskSpec& target_task,
                             const std::map<std::string, std::string>* label_map);

// Evaluates frozen source demonstrations under the target task, and a
// uniform_select prompt of the same size drawn from `target_pool` with
// `seed` as the baseline.
TransferReport transfer_evaluate(
    const Backend& backend, const DemonstrationSet& source_prompt,
    const TaskSpec& target_task, const Dataset& target_test,
    const Dataset& target_pool, std::uint64_t seed,
    const std::map<std::string, std::string>* label_map = nullptr,
    const EvalOptions& options = {});

// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|; nullopt
// when either sample is empty.
std::optional<double> ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace icr

#endif  // ICR_EVALUATION_H_
