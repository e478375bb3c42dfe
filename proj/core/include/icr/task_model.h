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

// Tasks, labeled examples, datasets and prompt rendering.

#ifndef ICR_TASK_MODEL_H_
#define ICR_TASK_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace icr {

// Field name -> text. Ordered so every iteration over it is deterministic.
using FieldMap = std::map<std::string, std::string>;

// Normalization applied to verbalizers and to model output tokens before
// they are compared.
struct VerbalizerNormalization {
  bool strip_leading_space = true;
  bool lowercase = true;

  std::string apply(std::string_view text) const;
};

class LabelSet {
 public:
  // Validates: >= 2 labels, unique ids, unique non-empty verbalizers, and no
  // verbalizer is a prefix of another once normalized. Labels without an
  // explicit verbalizer verbalize as their own identifier.
  LabelSet(std::vector<std::string> labels,
           std::map<std::string, std::string> verbalizers,
           VerbalizerNormalization normalization = {});

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view label) const;
  // Position in label order; throws ContractViolation for unknown labels.
  std::size_t index_of(std::string_view label) const;
  const std::string& verbalizer(std::string_view label) const;
  const VerbalizerNormalization& normalization() const {
    return normalization_;
  }

  // Labels whose normalized verbalizer has internal whitespace. Such
  // verbalizers are likely multi-token, which first-token extraction cannot
  // score reliably.
  std::vector<std::string> multi_token_verbalizers() const;

  // SHA-256 over the ordered label ids and verbalizers.
  std::string hash() const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::string> verbalizers_;
  VerbalizerNormalization normalization_;
};

struct Example {
  int id = 0;
  FieldMap fields;
  std::string label;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class DatasetRole { kTrainPool, kValidation, kTest };

std::string to_string(DatasetRole role);
DatasetRole parse_dataset_role(std::string_view text);

// An ordered, non-empty collection of examples with unique ids. Datasets
// loaded from disk carry ids 0..N-1 in file order; subsamples keep the ids of
// their source.
class Dataset {
 public:
  Dataset(std::vector<Example> examples, DatasetRole role);

  const std::vector<Example>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  DatasetRole role() const { return role_; }
  const Example& at(std::size_t index) const { return examples_.at(index); }
  const Example* find(int id) const;

  // Example count per label, in the label set's order.
  std::vector<std::size_t> label_counts(const LabelSet& labels) const;

 private:
  std::vector<Example> examples_;
  DatasetRole role_;
};

// One rendered block is `template` with every {field} substituted; the
// {label} slot must appear exactly once, at the very end. "{{" and "}}"
// produce literal braces.
class TaskSpec {
 public:
  TaskSpec(std::string name, LabelSet label_set, std::string prompt_template,
           std::string demo_separator = "\n\n", std::string query_suffix = "",
           std::size_t max_prompt_chars = 0);

  const std::string& name() const { return name_; }
  const LabelSet& label_set() const { return label_set_; }
  const std::string& prompt_template() const { return template_; }
  const std::string& demo_separator() const { return demo_separator_; }
  const std::string& query_suffix() const { return query_suffix_; }
  // 0 means no limit.
  std::size_t max_prompt_chars() const { return max_prompt_chars_; }
  // Field placeholders in first-appearance order, without "label".
  const std::vector<std::string>& fields() const { return fields_; }

  // Input text of an example as one string: its template fields joined by a
  // single space, in template order. Used for lexical scoring and embedding.
  std::string input_text(const FieldMap& fields) const;

  nlohmann::json to_json() const;
  static TaskSpec from_json(const nlohmann::json& config);

 private:
  struct Piece {
    bool is_field;
    std::string text;  // literal text or field name
  };

  std::string render_block(const FieldMap& fields,
                           std::string_view answer) const;

  friend std::string render_prompt(const TaskSpec&, std::span<const Example>,
                                   const FieldMap&);

  std::string name_;
  LabelSet label_set_;
  std::string template_;
  std::string demo_separator_;
  std::string query_suffix_;
  std::size_t max_prompt_chars_;
  std::vector<Piece> pieces_;
  std::vector<std::string> fields_;
};

// Reads a task config (.toml or .json; anything else is tried as JSON).
TaskSpec load_task_config(const std::filesystem::path& path);

struct Provenance {
  std::string method;
  std::uint64_t seed = 0;
  int iterations = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// The ordered demonstrations of one prompt.
struct DemonstrationSet {
  std::vector<Example> members;
  std::string source_task;
  Provenance provenance;

  std::vector<int> ids() const;
  // Throws ContractViolation on duplicate ids.
  void validate() const;
};

enum class DataFormat { kJsonl, kCsv };

// From the extension: .csv -> CSV, everything else JSONL.
DataFormat infer_format(const std::filesystem::path& path);

// Reads labeled records; ids follow file order. Every field the task template
// names must be present and non-empty; the label column is "label". Other
// string columns are kept verbatim.
Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const TaskSpec& task, DatasetRole role);
Dataset parse_dataset(std::string_view content, DataFormat format,
                      const TaskSpec& task, DatasetRole role);

// One JSON object per line with the example fields plus "label".
void write_dataset_jsonl(const Dataset& dataset, std::ostream& out);

// Demonstration blocks in member order, then the query block ending right
// after the query suffix where the answer would go.
std::string render_prompt(const TaskSpec& task, std::span<const Example> demos,
                          const FieldMap& query);

// Per-label counts proportional to `counts` summing to `size`, using
// largest-remainder rounding. Remainder ties go to the earlier label.
std::vector<std::size_t> proportional_counts(std::span<const std::size_t> counts,
                                             std::size_t size);

// Label-proportional subsample; selection is uniform within each label.
// Output keeps the source ids and the source order.
Dataset stratified_subsample(const Dataset& dataset, const LabelSet& labels,
                             std::size_t size, std::uint64_t seed);

nlohmann::json example_to_json(const Example& example);
Example example_from_json(const nlohmann::json& json);

}  // namespace icr

#endif  // ICR_TASK_MODEL_H_
