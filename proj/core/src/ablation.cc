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

#include "icr/ablation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "icr/errors.h"
#include "icr/random.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

std::string to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::kIterationSweep: return "iteration_sweep";
    case AblationVariant::kMisconfidenceBins: return "misconfidence_bins";
    case AblationVariant::kZeroShotInit: return "zero_shot_init";
    case AblationVariant::kFullMisconfidence: return "full_misconfidence";
    case AblationVariant::kDistanceAnalysis: return "distance_analysis";
    case AblationVariant::kPsiCaseStudy: return "psi_case_study";
  }
  return "unknown";
}

json AblationReport::to_json() const {
  return {{"variant", to_string(variant)}, {"payload", payload}};
}

namespace {

DemonstrationSet demos_from_ids(const Dataset& pool, const std::vector<int>& ids,
                                const std::string& task_name) {
  DemonstrationSet demos;
  demos.source_task = task_name;
  for (int id : ids) {
    const Example* e = pool.find(id);
    if (!e) throw ContractViolation("id " + std::to_string(id) + " not in pool");
    demos.members.push_back(*e);
  }
  return demos;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

// ------------------------------------------------------- iteration sweep

IterationSweep ablate_iterations(const Backend& backend, const TaskSpec& task,
                                 const Dataset& pool, const Dataset& test,
                                 ICRConfig config, int max_iterations,
                                 const EvalOptions& eval_options) {
  if (max_iterations < 1) throw ConfigError("iteration sweep needs K >= 1");
  config.k = max_iterations;
  IterationSweep sweep;
  IcrResult run = icr_select(backend, task, pool, config);
  const Dataset capped = cap_pool(pool, task.label_set(), config);
  std::vector<std::vector<int>> member_lists = {run.trace.initial_member_ids};
  for (const auto& it : run.trace.iterations) {
    member_lists.push_back(it.member_ids);
  }
  for (std::size_t i = 0; i < member_lists.size(); ++i) {
    const auto demos = demos_from_ids(capped, member_lists[i], task.name());
    const EvalReport report =
        evaluate(backend, task, PromptSource(demos), test, eval_options);
    sweep.points.push_back({static_cast<int>(i), member_lists[i],
                            report.accuracy, report.macro_f1});
  }
  sweep.trace = std::move(run.trace);
  return sweep;
}

AblationReport to_report(const IterationSweep& sweep) {
  json points = json::array();
  std::string csv = "iteration,accuracy,macro_f1\n";
  std::vector<std::string> categories;
  std::vector<std::vector<double>> series(2);
  for (const auto& p : sweep.points) {
    points.push_back({{"iteration", p.iteration},
                      {"member_ids", p.member_ids},
                      {"accuracy", p.accuracy},
                      {"macro_f1", p.macro_f1}});
    csv += std::to_string(p.iteration) + "," + fmt(p.accuracy) + "," +
           fmt(p.macro_f1) + "\n";
    categories.push_back(std::to_string(p.iteration));
    series[0].push_back(p.accuracy);
    series[1].push_back(p.macro_f1);
  }
  return {AblationVariant::kIterationSweep,
          {{"points", points}, {"trace", sweep.trace.to_json()}},
          csv,
          render_bar_chart_svg("Metrics per ICR iteration", categories,
                               {"accuracy", "macro_f1"}, series)};
}

// ------------------------------------------------- misconfidence bins

BinsResult ablate_misconfidence_bins(const Backend& backend,
                                     const TaskSpec& task, const Dataset& pool,
                                     const Dataset& test, std::size_t bins,
                                     std::size_t m,
                                     const std::vector<std::uint64_t>& seeds,
                                     const EvalOptions& eval_options) {
  if (bins < 1) throw ConfigError("need at least one bin");
  if (m < 1) throw ConfigError("need m >= 1");
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (pool.size() < bins * m) {
    throw ConfigError("pool of " + std::to_string(pool.size()) +
                      " is smaller than bins * m = " +
                      std::to_string(bins * m));
  }
  ScoreOptions score_options{eval_options.parallelism, false};
  ScoredPool scored = score_pool(backend, task, pool.examples(),
                                 DemonstrationSet{{}, task.name(), {}},
                                 score_options);
  auto& sorted = scored.ranked;
  std::sort(sorted.begin(), sorted.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.score.log_value != b.score.log_value) {
                return a.score.log_value < b.score.log_value;
              }
              return a.example.id < b.example.id;
            });
  std::unordered_map<int, double> psi_of;
  for (const auto& rc : sorted) psi_of[rc.example.id] = rc.score.log_value;

  BinsResult result;
  const std::size_t total = sorted.size();
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t begin = b * total / bins;
    const std::size_t end = (b + 1) * total / bins;
    MisconfidenceBin bin;
    bin.index = b;
    double sum = 0.0;
    std::vector<Example> members;
    for (std::size_t i = begin; i < end; ++i) {
      bin.example_ids.push_back(sorted[i].example.id);
      sum += sorted[i].score.log_value;
      members.push_back(sorted[i].example);
    }
    bin.lower_log_psi = sorted[begin].score.log_value;
    bin.upper_log_psi = sorted[end - 1].score.log_value;
    bin.mean_log_psi = sum / static_cast<double>(end - begin);
    for (std::uint64_t seed : seeds) {
      Rng rng(derive_seed(seed, "bin-" + std::to_string(b)));
      DemonstrationSet demos;
      demos.source_task = task.name();
      demos.members = rng.sample(members, m);
      demos.provenance = {"misconfidence-bin", seed, 0};
      const EvalReport report =
          evaluate(backend, task, PromptSource(demos), test, eval_options);
      BinPrompt prompt;
      prompt.seed = seed;
      prompt.member_ids = demos.ids();
      double prompt_sum = 0.0;
      for (int id : prompt.member_ids) prompt_sum += psi_of.at(id);
      prompt.mean_log_psi = prompt_sum / static_cast<double>(m);
      prompt.accuracy = report.accuracy;
      prompt.macro_f1 = report.macro_f1;
      bin.mean_accuracy += report.accuracy;
      bin.mean_macro_f1 += report.macro_f1;
      bin.prompts.push_back(std::move(prompt));
    }
    bin.mean_accuracy /= static_cast<double>(seeds.size());
    bin.mean_macro_f1 /= static_cast<double>(seeds.size());
    result.bins.push_back(std::move(bin));
  }
  return result;
}

AblationReport to_report(const BinsResult& result) {
  json bins = json::array();
  std::string csv =
      "bin,size,lower_log_psi,upper_log_psi,mean_log_psi,mean_accuracy,"
      "mean_macro_f1\n";
  std::vector<std::string> categories;
  std::vector<std::vector<double>> series(2);
  for (const auto& b : result.bins) {
    json prompts = json::array();
    for (const auto& p : b.prompts) {
      prompts.push_back({{"seed", p.seed},
                         {"member_ids", p.member_ids},
                         {"mean_log_psi", p.mean_log_psi},
                         {"accuracy", p.accuracy},
                         {"macro_f1", p.macro_f1}});
    }
    bins.push_back({{"index", b.index},
                    {"example_ids", b.example_ids},
                    {"lower_log_psi", b.lower_log_psi},
                    {"upper_log_psi", b.upper_log_psi},
                    {"mean_log_psi", b.mean_log_psi},
                    {"prompts", prompts},
                    {"mean_accuracy", b.mean_accuracy},
                    {"mean_macro_f1", b.mean_macro_f1}});
    csv += std::to_string(b.index) + "," + std::to_string(b.example_ids.size()) +
           "," + fmt(b.lower_log_psi) + "," + fmt(b.upper_log_psi) + "," +
           fmt(b.mean_log_psi) + "," + fmt(b.mean_accuracy) + "," +
           fmt(b.mean_macro_f1) + "\n";
    std::ostringstream label;
    label.precision(3);
    label << b.mean_log_psi;
    categories.push_back(label.str());
    series[0].push_back(b.mean_accuracy);
    series[1].push_back(b.mean_macro_f1);
  }
  return {AblationVariant::kMisconfidenceBins,
          {{"bins", bins}},
          csv,
          render_bar_chart_svg("Metrics by mean log misconfidence of bin",
                               categories, {"accuracy", "macro_f1"}, series)};
}

// ------------------------------------------------------------ variants

namespace {

VariantOutcome make_outcome(std::string name, const DemonstrationSet& demos,
                            const Backend& backend, const TaskSpec& task,
                            const Dataset& test, const EvalOptions& options) {
  VariantOutcome out;
  out.name = std::move(name);
  out.member_ids = demos.ids();
  out.label_histogram.assign(task.label_set().size(), 0);
  for (const auto& m : demos.members) {
    ++out.label_histogram[task.label_set().index_of(m.label)];
  }
  out.report = evaluate(backend, task, PromptSource(demos), test, options);
  return out;
}

}  // namespace

VariantsResult ablate_variants(const Backend& backend, const TaskSpec& task,
                               const Dataset& pool, const Dataset& test,
                               const ICRConfig& config,
                               const EvalOptions& eval_options) {
  config.validate();
  VariantsResult result;
  result.labels = task.label_set().labels();

  ICRConfig standard = config;
  standard.scoring_context = ScoringContext::kCurrentPrompt;
  result.standard = make_outcome(
      "standard", icr_select(backend, task, pool, standard).demos, backend,
      task, test, eval_options);

  ICRConfig zero_shot = config;
  zero_shot.scoring_context = ScoringContext::kZeroShot;
  result.zero_shot_init = make_outcome(
      "zero_shot_init", icr_select(backend, task, pool, zero_shot).demos,
      backend, task, test, eval_options);

  const Dataset capped = cap_pool(pool, task.label_set(), config);
  if (capped.size() < config.m) {
    throw ConfigError("pool smaller than m");
  }
  ScoredPool ranked = score_pool(backend, task, capped.examples(),
                                 DemonstrationSet{{}, task.name(), {}},
                                 config.score_options);
  DemonstrationSet full;
  full.source_task = task.name();
  full.provenance = {"full-misconfidence", config.seed, 0};
  for (std::size_t i = 0; i < config.m; ++i) {
    full.members.push_back(ranked.ranked[i].example);
  }
  result.full_misconfidence = make_outcome("full_misconfidence", full, backend,
                                           task, test, eval_options);

  for (VariantOutcome* v : {&result.standard, &result.zero_shot_init,
                            &result.full_misconfidence}) {
    v->delta_accuracy = v->report.accuracy - result.standard.report.accuracy;
    v->delta_macro_f1 = v->report.macro_f1 - result.standard.report.macro_f1;
  }
  return result;
}

AblationReport to_report(const VariantsResult& result, AblationVariant which) {
  const VariantOutcome* variant = nullptr;
  if (which == AblationVariant::kZeroShotInit) {
    variant = &result.zero_shot_init;
  } else if (which == AblationVariant::kFullMisconfidence) {
    variant = &result.full_misconfidence;
  } else {
    throw ContractViolation("not a selection-variant ablation");
  }
  json variants = json::array();
  std::string csv = "variant,accuracy,macro_f1,delta_accuracy,delta_macro_f1";
  for (const auto& l : result.labels) csv += ",count_" + l;
  csv += "\n";
  std::vector<std::string> names;
  std::vector<std::vector<double>> series(2);
  for (const VariantOutcome* v : {&result.standard, variant}) {
    variants.push_back({{"name", v->name},
                        {"member_ids", v->member_ids},
                        {"label_histogram", v->label_histogram},
                        {"accuracy", v->report.accuracy},
                        {"macro_f1", v->report.macro_f1},
                        {"delta_accuracy", v->delta_accuracy},
                        {"delta_macro_f1", v->delta_macro_f1},
                        {"confusion", v->report.confusion}});
    csv += v->name + "," + fmt(v->report.accuracy) + "," +
           fmt(v->report.macro_f1) + "," + fmt(v->delta_accuracy) + "," +
           fmt(v->delta_macro_f1);
    for (auto c : v->label_histogram) csv += "," + std::to_string(c);
    csv += "\n";
    names.push_back(v->name);
    series[0].push_back(v->report.accuracy);
    series[1].push_back(v->report.macro_f1);
  }
  return {which,
          {{"labels", result.labels}, {"variants", variants}},
          csv,
          render_bar_chart_svg("Standard ICR vs " + variant->name, names,
                               {"accuracy", "macro_f1"}, series)};
}

// --------------------------------------------------- distance analysis

DistanceResult distance_analysis(const Backend& backend, const TaskSpec& task,
                                 const DemonstrationSet& demos,
                                 const Dataset& test,
                                 const EmbeddingProvider& provider,
                                 const EvalOptions& eval_options) {
  if (demos.members.empty()) {
    throw ConfigError("distance analysis needs a non-empty prompt");
  }
  std::vector<EmbeddingVector> demo_vectors;
  for (const auto& d : demos.members) {
    demo_vectors.push_back(provider.embed(
        {task.input_text(d.fields), d.id, DatasetRole::kTrainPool}));
  }
  const PromptSource zero(DemonstrationSet{{}, task.name(), {}});
  const PromptSource few(demos);
  std::vector<DistanceCase> cases(test.size());
  const std::size_t parallelism = eval_options.parallelism
                                      ? eval_options.parallelism
                                      : backend.parallelism();
  auto errors = parallel_for(test.size(), parallelism, [&](std::size_t i) {
    const Example& e = test.at(i);
    DistanceCase c;
    c.id = e.id;
    c.zero_shot = predict(backend, task, zero, e, test.role());
    c.few_shot = predict(backend, task, few, e, test.role());
    c.changed = c.zero_shot != c.few_shot;
    const auto q = provider.embed({task.input_text(e.fields), e.id, test.role()});
    c.min_distance = std::numeric_limits<double>::infinity();
    for (const auto& d : demo_vectors) {
      c.min_distance = std::min(c.min_distance, cosine_distance(q, d));
    }
    cases[i] = std::move(c);
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  DistanceResult result;
  result.cases = std::move(cases);
  for (const auto& c : result.cases) {
    result.all_distances.push_back(c.min_distance);
    if (c.changed) result.changed_distances.push_back(c.min_distance);
  }
  result.ks = ks_statistic(result.all_distances, result.changed_distances);
  return result;
}

AblationReport to_report(const DistanceResult& result) {
  json cases = json::array();
  std::string csv = "id,zero_shot,few_shot,changed,min_distance\n";
  for (const auto& c : result.cases) {
    cases.push_back({{"id", c.id},
                     {"zero_shot", c.zero_shot},
                     {"few_shot", c.few_shot},
                     {"changed", c.changed},
                     {"min_distance", c.min_distance}});
    csv += std::to_string(c.id) + "," + c.zero_shot + "," + c.few_shot + "," +
           (c.changed ? "1" : "0") + "," + fmt(c.min_distance) + "\n";
  }
  // Histogram of both samples over [0, 2] for the plot.
  constexpr std::size_t kBins = 10;
  std::vector<std::string> categories;
  std::vector<std::vector<double>> series(2, std::vector<double>(kBins, 0.0));
  for (std::size_t b = 0; b < kBins; ++b) {
    std::ostringstream label;
    label.precision(2);
    label << 0.2 * static_cast<double>(b);
    categories.push_back(label.str());
  }
  auto fill = [&](const std::vector<double>& sample, std::vector<double>& out) {
    for (double d : sample) {
      auto b = static_cast<std::size_t>(std::clamp(d, 0.0, 1.999999) / 0.2);
      out[std::min(b, kBins - 1)] += 1.0 / static_cast<double>(sample.size());
    }
  };
  fill(result.all_distances, series[0]);
  fill(result.changed_distances, series[1]);
  return {AblationVariant::kDistanceAnalysis,
          {{"cases", cases},
           {"all_distances", result.all_distances},
           {"changed_distances", result.changed_distances},
           {"ks_statistic", result.ks ? json(*result.ks) : json(nullptr)}},
          csv,
          render_bar_chart_svg("Distance to nearest demonstration", categories,
                               {"all cases", "changed cases"}, series)};
}

// ---------------------------------------------------- psi case study

PsiCaseStudy psi_case_study(const Backend& backend, const TaskSpec& task,
                            const Dataset& pool, const Dataset& test,
                            ICRConfig config, std::size_t histogram_bins,
                            const EvalOptions& eval_options) {
  if (histogram_bins < 1) throw ConfigError("need at least one histogram bin");
  config.k = 1;
  config.validate();
  const LabelSet& labels = task.label_set();
  const Dataset capped = cap_pool(pool, labels, config);
  if (capped.size() < config.m + config.n) {
    throw ConfigError("pool smaller than m + n");
  }
  DemonstrationSet initial = icr_init(capped, labels, config);
  initial.source_task = task.name();
  std::unordered_set<int> member_ids;
  for (const auto& m : initial.members) member_ids.insert(m.id);
  std::vector<Example> candidates;
  for (const auto& e : capped.examples()) {
    if (!member_ids.contains(e.id)) candidates.push_back(e);
  }
  ScoredPool scored =
      score_pool(backend, task, candidates, initial, config.score_options);

  PsiCaseStudy study;
  study.labels = labels.labels();
  study.counts.assign(labels.size(), std::vector<std::size_t>(histogram_bins, 0));
  study.mean_log_psi.assign(labels.size(), 0.0);
  study.scored.assign(labels.size(), 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& rc : scored.ranked) {
    lo = std::min(lo, rc.score.log_value);
    hi = std::max(hi, rc.score.log_value);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  for (std::size_t b = 0; b <= histogram_bins; ++b) {
    study.bin_edges.push_back(lo + (hi - lo) * static_cast<double>(b) /
                                       static_cast<double>(histogram_bins));
  }
  for (const auto& rc : scored.ranked) {
    const std::size_t l = labels.index_of(rc.example.label);
    auto b = static_cast<std::size_t>((rc.score.log_value - lo) / (hi - lo) *
                                      static_cast<double>(histogram_bins));
    ++study.counts[l][std::min(b, histogram_bins - 1)];
    study.mean_log_psi[l] += rc.score.log_value;
    ++study.scored[l];
  }
  for (std::size_t l = 0; l < labels.size(); ++l) {
    if (study.scored[l]) {
      study.mean_log_psi[l] /= static_cast<double>(study.scored[l]);
    }
  }
  RefineResult refined = icr_refine(initial, scored.ranked, config.n);
  study.initial_ids = initial.ids();
  study.refined_ids = refined.demos.ids();
  study.before =
      evaluate(backend, task, PromptSource(initial), test, eval_options);
  study.after =
      evaluate(backend, task, PromptSource(refined.demos), test, eval_options);
  return study;
}

AblationReport to_report(const PsiCaseStudy& study) {
  json hist = json::object();
  std::string csv = "label,bin,lower,upper,count\n";
  std::vector<std::string> categories;
  std::vector<std::vector<double>> series;
  for (std::size_t b = 0; b + 1 < study.bin_edges.size(); ++b) {
    std::ostringstream label;
    label.precision(3);
    label << study.bin_edges[b];
    categories.push_back(label.str());
  }
  for (std::size_t l = 0; l < study.labels.size(); ++l) {
    hist[study.labels[l]] = study.counts[l];
    std::vector<double> row;
    for (std::size_t b = 0; b < study.counts[l].size(); ++b) {
      csv += study.labels[l] + "," + std::to_string(b) + "," +
             fmt(study.bin_edges[b]) + "," + fmt(study.bin_edges[b + 1]) + "," +
             std::to_string(study.counts[l][b]) + "\n";
      row.push_back(static_cast<double>(study.counts[l][b]));
    }
    series.push_back(std::move(row));
  }
  return {AblationVariant::kPsiCaseStudy,
          {{"labels", study.labels},
           {"bin_edges", study.bin_edges},
           {"histogram", hist},
           {"mean_log_psi", study.mean_log_psi},
           {"scored", study.scored},
           {"initial_ids", study.initial_ids},
           {"refined_ids", study.refined_ids},
           {"confusion_before", study.before.confusion},
           {"confusion_after", study.after.confusion},
           {"accuracy_before", study.before.accuracy},
           {"accuracy_after", study.after.accuracy},
           {"macro_f1_before", study.before.macro_f1},
           {"macro_f1_after", study.after.macro_f1}},
          csv,
          render_bar_chart_svg("Log misconfidence by gold label", categories,
                               study.labels, series)};
}

// ----------------------------------------------------------------- SVG

std::string render_bar_chart_svg(const std::string& title,
                                 const std::vector<std::string>& categories,
                                 const std::vector<std::string>& series_names,
                                 const std::vector<std::vector<double>>& series) {
  static const char* kColors[] = {"#4c72b0", "#dd8452", "#55a868",
                                  "#c44e52", "#8172b3", "#937860"};
  constexpr double kWidth = 640, kHeight = 360, kLeft = 50, kBottom = 40,
                   kTop = 40, kRight = 20;
  double max_value = 0.0;
  for (const auto& s : series) {
    for (double v : s) max_value = std::max(max_value, v);
  }
  if (max_value <= 0.0) max_value = 1.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  const double group_w =
      plot_w / static_cast<double>(std::max<std::size_t>(categories.size(), 1));
  const double bar_w =
      group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  auto escape = [](const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out.push_back(c);
    }
    return out;
  };
  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" "
      << "font-size=\"14\">" << escape(title) << "</text>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\""
      << kLeft + plot_w << "\" y2=\"" << kTop + plot_h
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft - 5 << "\" y=\"" << kTop + 4
      << "\" text-anchor=\"end\">" << max_value << "</text>\n";
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = c < series[s].size() ? series[s][c] : 0.0;
      const double h = plot_h * v / max_value;
      svg << "<rect x=\"" << gx + bar_w * static_cast<double>(s) << "\" y=\""
          << kTop + plot_h - h << "\" width=\"" << bar_w << "\" height=\"" << h
          << "\" fill=\"" << kColors[s % 6] << "\"/>\n";
    }
    svg << "<text x=\"" << gx + group_w * 0.4 << "\" y=\""
        << kTop + plot_h + 15 << "\" text-anchor=\"middle\">"
        << escape(categories[c]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series_names.size(); ++s) {
    const double y = kHeight - 10;
    const double x = kLeft + 120.0 * static_cast<double>(s);
    svg << "<rect x=\"" << x << "\" y=\"" << y - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << kColors[s % 6]
        << "\"/>\n";
    svg << "<text x=\"" << x + 14 << "\" y=\"" << y << "\">"
        << escape(series_names[s]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace icr
