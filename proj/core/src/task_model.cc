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

#include "icr/task_model.h"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_set>

#include "icr/errors.h"
#include "icr/random.h"
#include "icr/toml_lite.h"
#include "icr/util.h"

namespace icr {

using nlohmann::json;

std::string VerbalizerNormalization::apply(std::string_view text) const {
  if (strip_leading_space) {
    while (!text.empty() &&
           std::isspace(static_cast<unsigned char>(text.front()))) {
      text.remove_prefix(1);
    }
  }
  std::string out(text);
  if (lowercase) {
    for (char& c : out) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  return out;
}

// ---------------------------------------------------------------- LabelSet

LabelSet::LabelSet(std::vector<std::string> labels,
                   std::map<std::string, std::string> verbalizers,
                   VerbalizerNormalization normalization)
    : labels_(std::move(labels)), normalization_(normalization) {
  if (labels_.size() < 2) {
    throw ConfigError("a label set needs at least 2 labels");
  }
  std::set<std::string> seen;
  for (const auto& label : labels_) {
    if (label.empty()) throw ConfigError("empty label identifier");
    if (!seen.insert(label).second) {
      throw ConfigError("duplicate label '" + label + "'");
    }
  }
  for (const auto& [label, _] : verbalizers) {
    if (!seen.contains(label)) {
      throw ConfigError("verbalizer given for unknown label '" + label + "'");
    }
  }
  for (const auto& label : labels_) {
    auto it = verbalizers.find(label);
    verbalizers_[label] = it == verbalizers.end() ? label : it->second;
  }
  std::vector<std::string> normalized;
  for (const auto& label : labels_) {
    const std::string& v = verbalizers_[label];
    if (v.empty()) {
      throw ConfigError("empty verbalizer for label '" + label + "'");
    }
    normalized.push_back(normalization_.apply(v));
    if (normalized.back().empty()) {
      throw ConfigError("verbalizer for label '" + label +
                        "' is blank after normalization");
    }
  }
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    for (std::size_t j = 0; j < normalized.size(); ++j) {
      if (i == j) continue;
      if (normalized[j].starts_with(normalized[i])) {
        throw ConfigError("verbalizer '" + verbalizers_[labels_[i]] +
                          "' collides with '" + verbalizers_[labels_[j]] +
                          "' after normalization");
      }
    }
  }
}

bool LabelSet::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw ContractViolation("label '" + std::string(label) +
                            "' is not in the label set");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

const std::string& LabelSet::verbalizer(std::string_view label) const {
  auto it = verbalizers_.find(std::string(label));
  if (it == verbalizers_.end()) {
    throw ContractViolation("label '" + std::string(label) +
                            "' is not in the label set");
  }
  return it->second;
}

std::vector<std::string> LabelSet::multi_token_verbalizers() const {
  std::vector<std::string> out;
  for (const auto& label : labels_) {
    const std::string normalized = normalization_.apply(verbalizer(label));
    if (std::any_of(normalized.begin(), normalized.end(), [](char c) {
          return std::isspace(static_cast<unsigned char>(c));
        })) {
      out.push_back(label);
    }
  }
  return out;
}

std::string LabelSet::hash() const {
  json canonical = json::array();
  for (const auto& label : labels_) {
    canonical.push_back({label, verbalizer(label)});
  }
  return sha256_hex(canonical.dump());
}

// ----------------------------------------------------------------- Dataset

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::kTrainPool: return "train-pool";
    case DatasetRole::kValidation: return "validation";
    case DatasetRole::kTest: return "test";
  }
  return "unknown";
}

DatasetRole parse_dataset_role(std::string_view text) {
  if (text == "train-pool") return DatasetRole::kTrainPool;
  if (text == "validation") return DatasetRole::kValidation;
  if (text == "test") return DatasetRole::kTest;
  throw ConfigError("unknown dataset role '" + std::string(text) + "'");
}

Dataset::Dataset(std::vector<Example> examples, DatasetRole role)
    : examples_(std::move(examples)), role_(role) {
  if (examples_.empty()) throw ContractViolation("dataset is empty");
  std::unordered_set<int> ids;
  for (const auto& e : examples_) {
    if (!ids.insert(e.id).second) {
      throw ContractViolation("duplicate example id " + std::to_string(e.id));
    }
  }
}

const Example* Dataset::find(int id) const {
  for (const auto& e : examples_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<std::size_t> Dataset::label_counts(const LabelSet& labels) const {
  std::vector<std::size_t> counts(labels.size(), 0);
  for (const auto& e : examples_) ++counts[labels.index_of(e.label)];
  return counts;
}

// ---------------------------------------------------------------- TaskSpec

TaskSpec::TaskSpec(std::string name, LabelSet label_set,
                   std::string prompt_template, std::string demo_separator,
                   std::string query_suffix, std::size_t max_prompt_chars)
    : name_(std::move(name)),
      label_set_(std::move(label_set)),
      template_(std::move(prompt_template)),
      demo_separator_(std::move(demo_separator)),
      query_suffix_(std::move(query_suffix)),
      max_prompt_chars_(max_prompt_chars) {
  if (name_.empty()) throw ConfigError("task name is empty");
  std::string literal;
  int label_slots = 0;
  for (std::size_t i = 0; i < template_.size(); ++i) {
    const char c = template_[i];
    if (c == '{' && i + 1 < template_.size() && template_[i + 1] == '{') {
      literal.push_back('{');
      ++i;
    } else if (c == '}' && i + 1 < template_.size() &&
               template_[i + 1] == '}') {
      literal.push_back('}');
      ++i;
    } else if (c == '{') {
      const std::size_t close = template_.find('}', i);
      if (close == std::string::npos) {
        throw ConfigError("unterminated placeholder in template of task '" +
                          name_ + "'");
      }
      std::string field = template_.substr(i + 1, close - i - 1);
      if (field.empty()) {
        throw ConfigError("empty placeholder in template of task '" + name_ +
                          "'");
      }
      if (field.find('{') != std::string::npos) {
        throw ConfigError("unterminated placeholder in template of task '" +
                          name_ + "'");
      }
      if (!literal.empty()) {
        pieces_.push_back({false, std::move(literal)});
        literal.clear();
      }
      if (field == "label") {
        ++label_slots;
      } else if (std::find(fields_.begin(), fields_.end(), field) ==
                 fields_.end()) {
        fields_.push_back(field);
      }
      pieces_.push_back({true, std::move(field)});
      i = close;
    } else if (c == '}') {
      throw ConfigError("unmatched '}' in template of task '" + name_ + "'");
    } else {
      literal.push_back(c);
    }
  }
  if (!literal.empty()) pieces_.push_back({false, std::move(literal)});
  if (label_slots != 1) {
    throw ConfigError("template of task '" + name_ +
                      "' must contain exactly one {label} slot");
  }
  if (!pieces_.back().is_field || pieces_.back().text != "label") {
    throw ConfigError("the {label} slot must end the template of task '" +
                      name_ + "'");
  }
  if (fields_.empty()) {
    throw ConfigError("template of task '" + name_ +
                      "' references no input fields");
  }
}

std::string TaskSpec::render_block(const FieldMap& fields,
                                   std::string_view answer) const {
  std::string out;
  for (const auto& piece : pieces_) {
    if (!piece.is_field) {
      out += piece.text;
    } else if (piece.text == "label") {
      out += answer;
    } else {
      auto it = fields.find(piece.text);
      if (it == fields.end()) {
        throw RenderError("missing field '" + piece.text + "' for task '" +
                          name_ + "'");
      }
      out += it->second;
    }
  }
  return out;
}

std::string TaskSpec::input_text(const FieldMap& fields) const {
  std::string out;
  for (const auto& name : fields_) {
    auto it = fields.find(name);
    if (it == fields.end()) {
      throw RenderError("missing field '" + name + "' for task '" + name_ +
                        "'");
    }
    if (!out.empty()) out.push_back(' ');
    out += it->second;
  }
  return out;
}

json TaskSpec::to_json() const {
  json verbalizers = json::object();
  for (const auto& label : label_set_.labels()) {
    verbalizers[label] = label_set_.verbalizer(label);
  }
  return {
      {"name", name_},
      {"labels", label_set_.labels()},
      {"verbalizers", verbalizers},
      {"template", template_},
      {"demo_separator", demo_separator_},
      {"query_suffix", query_suffix_},
      {"max_prompt_chars", max_prompt_chars_},
      {"normalization",
       {{"strip_leading_space", label_set_.normalization().strip_leading_space},
        {"lowercase", label_set_.normalization().lowercase}}},
  };
}

TaskSpec TaskSpec::from_json(const json& config) {
  try {
    std::vector<std::string> labels;
    for (const auto& l : config.at("labels")) {
      labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
    }
    std::map<std::string, std::string> verbalizers;
    if (config.contains("verbalizers")) {
      for (const auto& [k, v] : config.at("verbalizers").items()) {
        verbalizers[k] = v.get<std::string>();
      }
    }
    VerbalizerNormalization norm;
    if (config.contains("normalization")) {
      const auto& n = config.at("normalization");
      norm.strip_leading_space =
          n.value("strip_leading_space", norm.strip_leading_space);
      norm.lowercase = n.value("lowercase", norm.lowercase);
    }
    return TaskSpec(config.at("name").get<std::string>(),
                    LabelSet(std::move(labels), std::move(verbalizers), norm),
                    config.at("template").get<std::string>(),
                    config.value("demo_separator", std::string("\n\n")),
                    config.value("query_suffix", std::string()),
                    config.value("max_prompt_chars", std::size_t{0}));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid task config: ") + e.what());
  }
}

TaskSpec load_task_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  json config;
  if (path.extension() == ".toml") {
    config = parse_toml(text);
  } else {
    try {
      config = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError("invalid task config '" + path.string() +
                        "': " + e.what());
    }
  }
  return TaskSpec::from_json(config);
}

// ------------------------------------------------------- DemonstrationSet

std::vector<int> DemonstrationSet::ids() const {
  std::vector<int> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.id);
  return out;
}

void DemonstrationSet::validate() const {
  std::unordered_set<int> seen;
  for (const auto& m : members) {
    if (!seen.insert(m.id).second) {
      throw ContractViolation("duplicate demonstration id " +
                              std::to_string(m.id));
    }
  }
}

// ---------------------------------------------------------------- Ingestion

DataFormat infer_format(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DataFormat::kCsv : DataFormat::kJsonl;
}

namespace {

// A record before validation: column -> value, plus its source line.
struct RawRecord {
  int line;
  std::map<std::string, std::string> columns;
};

std::vector<RawRecord> read_jsonl(std::string_view content) {
  std::vector<RawRecord> records;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw IngestionError("malformed JSON at line " + std::to_string(line_no) +
                           ": " + e.what());
    }
    if (!obj.is_object()) {
      throw IngestionError("record at line " + std::to_string(line_no) +
                           " is not a JSON object");
    }
    RawRecord record{line_no, {}};
    for (const auto& [key, value] : obj.items()) {
      if (value.is_string()) {
        record.columns[key] = value.get<std::string>();
      } else if (value.is_number_integer() || value.is_boolean()) {
        record.columns[key] = value.dump();
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

// RFC 4180: quoted fields may contain commas, doubled quotes and newlines.
std::vector<std::pair<int, std::vector<std::string>>> read_csv_rows(
    std::string_view content) {
  std::vector<std::pair<int, std::vector<std::string>>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  int line = 1;
  int row_line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.size() == 1 && row[0].empty();
    if (!blank) rows.emplace_back(row_line, std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      continue;
    } else if (c == '\n') {
      end_row();
      ++line;
      row_line = line;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) {
    throw IngestionError("unterminated quoted CSV field starting at line " +
                         std::to_string(row_line));
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::vector<RawRecord> read_csv(std::string_view content) {
  auto rows = read_csv_rows(content);
  std::vector<RawRecord> records;
  if (rows.empty()) return records;
  const std::vector<std::string> header = rows.front().second;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [line, values] = rows[r];
    if (values.size() != header.size()) {
      throw IngestionError("CSV row at line " + std::to_string(line) +
                           " has " + std::to_string(values.size()) +
                           " columns, header has " +
                           std::to_string(header.size()));
    }
    RawRecord record{line, {}};
    for (std::size_t c = 0; c < header.size(); ++c) {
      record.columns[header[c]] = values[c];
    }
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace

Dataset parse_dataset(std::string_view content, DataFormat format,
                      const TaskSpec& task, DatasetRole role) {
  std::vector<RawRecord> records =
      format == DataFormat::kCsv ? read_csv(content) : read_jsonl(content);
  if (records.empty()) throw IngestionError("dataset contains no records");
  std::vector<Example> examples;
  examples.reserve(records.size());
  for (auto& record : records) {
    const std::string at_line = " at line " + std::to_string(record.line);
    auto label_it = record.columns.find("label");
    if (label_it == record.columns.end()) {
      throw IngestionError("missing field 'label'" + at_line);
    }
    if (!task.label_set().contains(label_it->second)) {
      throw IngestionError("unknown label '" + label_it->second + "'" +
                           at_line);
    }
    for (const auto& field : task.fields()) {
      auto it = record.columns.find(field);
      if (it == record.columns.end()) {
        throw IngestionError("missing field '" + field + "'" + at_line);
      }
      if (it->second.empty()) {
        throw IngestionError("empty field '" + field + "'" + at_line);
      }
    }
    Example example;
    example.id = static_cast<int>(examples.size());
    example.label = label_it->second;
    record.columns.erase(label_it);
    example.fields = std::move(record.columns);
    examples.push_back(std::move(example));
  }
  return Dataset(std::move(examples), role);
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const TaskSpec& task, DatasetRole role) {
  std::string content;
  try {
    content = read_file(path);
  } catch (const Error& e) {
    throw IngestionError(e.what());
  }
  try {
    return parse_dataset(content, format, task, role);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

void write_dataset_jsonl(const Dataset& dataset, std::ostream& out) {
  for (const auto& e : dataset.examples()) {
    json obj(e.fields);
    obj["label"] = e.label;
    out << obj.dump() << '\n';
  }
}

// ------------------------------------------------------------- Rendering

std::string render_prompt(const TaskSpec& task, std::span<const Example> demos,
                          const FieldMap& query) {
  std::string out;
  for (const auto& demo : demos) {
    out += task.render_block(demo.fields,
                             task.label_set().verbalizer(demo.label));
    out += task.demo_separator();
  }
  std::string query_block = task.render_block(query, "");
  out += query_block;
  out += task.query_suffix();
  if (task.max_prompt_chars() != 0 && out.size() > task.max_prompt_chars()) {
    throw RenderError("prompt of " + std::to_string(out.size()) +
                      " characters exceeds the limit of " +
                      std::to_string(task.max_prompt_chars()) +
                      " for task '" + task.name() + "'");
  }
  return out;
}

// ------------------------------------------------------------- Sampling

std::vector<std::size_t> proportional_counts(std::span<const std::size_t> counts,
                                             std::size_t size) {
  const std::size_t total =
      std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (size > total) {
    throw ContractViolation("requested " + std::to_string(size) +
                            " examples from " + std::to_string(total));
  }
  std::vector<std::size_t> out(counts.size());
  std::vector<std::size_t> remainders(counts.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    // Exact integer arithmetic: quota = counts[i] * size / total.
    out[i] = counts[i] * size / total;
    remainders[i] = counts[i] * size % total;
    assigned += out[i];
  }
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t r = 0; assigned < size; ++r) {
    ++out[order[r]];
    ++assigned;
  }
  return out;
}

Dataset stratified_subsample(const Dataset& dataset, const LabelSet& labels,
                             std::size_t size, std::uint64_t seed) {
  if (size > dataset.size()) {
    throw ConfigError("subsample size " + std::to_string(size) +
                      " exceeds dataset size " +
                      std::to_string(dataset.size()));
  }
  if (size < labels.size()) {
    throw ConfigError("subsample size " + std::to_string(size) +
                      " is smaller than the number of labels");
  }
  const auto counts = dataset.label_counts(labels);
  const auto quota = proportional_counts(counts, size);
  std::vector<std::vector<std::size_t>> by_label(labels.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    by_label[labels.index_of(dataset.at(i).label)].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    auto picked = rng.sample(by_label[l], quota[l]);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Example> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(dataset.at(i));
  return Dataset(std::move(out), dataset.role());
}

json example_to_json(const Example& example) {
  return {{"id", example.id}, {"fields", example.fields},
          {"label", example.label}};
}

Example example_from_json(const json& j) {
  Example e;
  e.id = j.at("id").get<int>();
  e.fields = j.at("fields").get<FieldMap>();
  e.label = j.at("label").get<std::string>();
  return e;
}

}  // namespace icr
