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

#include "icr/evaluation.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icr/errors.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

DemonstrationSet PromptSource::demos_for(const Backend& backend,
                                         const TaskSpec& task,
                                         const Example& query,
                                         DatasetRole role) const {
  if (is_fixed()) return demos();
  return retriever().retrieve(backend, task, query, role).demos;
}

std::string PromptSource::hash() const {
  if (is_fixed()) {
    json members = json::array();
    for (const auto& m : demos().members) members.push_back(example_to_json(m));
    return sha256_hex(members.dump());
  }
  const RetrievalPlan& plan = retriever().plan();
  json pool = json::array();
  for (const auto& e : plan.pool) pool.push_back(example_to_json(e));
  return sha256_hex(json{{"method", to_string(plan.method)},
                         {"k", plan.k},
                         {"provider", plan.provider_id},
                         {"nearest_last", plan.nearest_last},
                         {"pool", pool}}
                        .dump());
}

std::string predict(const Backend& backend, const TaskSpec& task,
                    const PromptSource& source, const Example& query,
                    DatasetRole role) {
  const DemonstrationSet demos = source.demos_for(backend, task, query, role);
  const LabelDistribution dist =
      backend.label_distribution(task, demos.members, query.fields);
  dist.validate();
  return dist.labels[dist.argmax()];
}

EvalReport compute_report(const std::vector<std::string>& labels,
                          const std::vector<Prediction>& predictions,
                          std::string prompt_hash) {
  if (predictions.empty()) throw ContractViolation("no predictions to score");
  const std::size_t n = labels.size();
  auto index = [&](const std::string& label) {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      throw ContractViolation("unknown label '" + label + "' in predictions");
    }
    return static_cast<std::size_t>(it - labels.begin());
  };
  EvalReport report;
  report.labels = labels;
  report.confusion.assign(n, std::vector<std::size_t>(n, 0));
  for (const auto& p : predictions) {
    ++report.confusion[index(p.gold)][index(p.predicted)];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) correct += report.confusion[i][i];
  report.n_cases = predictions.size();
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(report.n_cases);
  double f1_sum = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    std::size_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < n; ++j) {
      support += report.confusion[l][j];
      predicted += report.confusion[j][l];
    }
    const double tp = static_cast<double>(report.confusion[l][l]);
    LabelMetrics m;
    m.support = support;
    m.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    m.recall = support ? tp / static_cast<double>(support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    f1_sum += m.f1;
    report.per_label.push_back(m);
  }
  report.macro_f1 = f1_sum / static_cast<double>(n);
  report.prompt_hash = std::move(prompt_hash);
  report.predictions = predictions;
  return report;
}

json EvalReport::to_json() const {
  json per = json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    per[labels[i]] = {{"precision", per_label[i].precision},
                      {"recall", per_label[i].recall},
                      {"f1", per_label[i].f1},
                      {"support", per_label[i].support}};
  }
  json preds = json::array();
  for (const auto& p : predictions) {
    preds.push_back({{"id", p.id}, {"gold", p.gold}, {"predicted", p.predicted}});
  }
  return {{"accuracy", accuracy},   {"macro_f1", macro_f1},
          {"labels", labels},       {"per_label", per},
          {"confusion", confusion}, {"n_cases", n_cases},
          {"prompt_hash", prompt_hash}, {"predictions", preds},
          {"skipped_ids", skipped_ids}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "label,precision,recall,f1,support\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels[i] << ',' << per_label[i].precision << ','
        << per_label[i].recall << ',' << per_label[i].f1 << ','
        << per_label[i].support << '\n';
  }
  return out.str();
}

EvalReport evaluate(const Backend& backend, const TaskSpec& task,
                    const PromptSource& source, const Dataset& test,
                    const EvalOptions& options) {
  if (test.size() == 0) throw ConfigError("empty test set");
  std::vector<std::string> predicted(test.size());
  const std::size_t parallelism =
      options.parallelism ? options.parallelism : backend.parallelism();
  auto errors = parallel_for(test.size(), parallelism, [&](std::size_t i) {
    predicted[i] = predict(backend, task, source, test.at(i), test.role());
  });
  std::vector<Prediction> predictions;
  std::vector<int> skipped;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const Example& e = test.at(i);
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        if (!options.skip_failures) throw ScoringError(e.id, ex.what());
      }
      skipped.push_back(e.id);
      continue;
    }
    predictions.push_back({e.id, e.label, predicted[i]});
  }
  if (predictions.empty()) throw BackendError("every test case failed");
  EvalReport report =
      compute_report(task.label_set().labels(), predictions, source.hash());
  report.skipped_ids = std::move(skipped);
  return report;
}

json TransferReport::to_json() const {
  return {{"transfer", transfer.to_json()},
          {"baseline", baseline.to_json()},
          {"delta_accuracy", delta_accuracy},
          {"delta_macro_f1", delta_macro_f1}};
}

DemonstrationSet reverbalize(const DemonstrationSet& source,
                             const TaskSpec& target_task,
                             const std::map<std::string, std::string>* label_map) {
  DemonstrationSet out = source;
  out.source_task = target_task.name();
  for (auto& member : out.members) {
    std::string label = member.label;
    if (label_map) {
      auto it = label_map->find(label);
      if (it == label_map->end()) {
        throw ConfigError("label map has no entry for '" + label + "'");
      }
      label = it->second;
    }
    if (!target_task.label_set().contains(label)) {
      throw ConfigError("label '" + label + "' is not a label of task '" +
                        target_task.name() +
                        "'; supply a label map to transfer between label sets");
    }
    member.label = label;
    for (const auto& field : target_task.fields()) {
      if (!member.fields.contains(field)) {
        throw ConfigError("demonstration " + std::to_string(member.id) +
                          " lacks field '" + field + "' required by task '" +
                          target_task.name() + "'");
      }
    }
  }
  return out;
}

TransferReport transfer_evaluate(
    const Backend& backend, const DemonstrationSet& source_prompt,
    const TaskSpec& target_task, const Dataset& target_test,
    const Dataset& target_pool, std::uint64_t seed,
    const std::map<std::string, std::string>* label_map,
    const EvalOptions& options) {
  TransferReport out;
  const DemonstrationSet transferred =
      reverbalize(source_prompt, target_task, label_map);
  out.transfer = evaluate(backend, target_task, PromptSource(transferred),
                          target_test, options);
  DemonstrationSet baseline =
      uniform_select(target_pool, target_task.label_set(),
                     source_prompt.members.size(), seed);
  baseline.source_task = target_task.name();
  out.baseline = evaluate(backend, target_task, PromptSource(baseline),
                          target_test, options);
  out.delta_accuracy = out.transfer.accuracy - out.baseline.accuracy;
  out.delta_macro_f1 = out.transfer.macro_f1 - out.baseline.macro_f1;
  return out;
}

std::optional<double> ks_statistic(std::vector<double> a,
                                   std::vector<double> b) {
  if (a.empty() || b.empty()) return std::nullopt;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double best = 0.0;
  while (i < a.size() || j < b.size()) {
    // Step past every copy of the next smallest value in both samples.
    double x;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) {
      x = a[i];
    } else {
      x = b[j];
    }
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    best = std::max(best, std::abs(static_cast<double>(i) / na -
                                   static_cast<double>(j) / nb));
  }
  return best;
}

}  // namespace icr
