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

#include "icr/backend.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <httplib.h>

#include "icr/errors.h"

namespace icr {

using nlohmann::json;

std::string to_string(DistributionSource source) {
  switch (source) {
    case DistributionSource::kHttp: return "http";
    case DistributionSource::kSynthetic: return "synthetic";
    case DistributionSource::kCache: return "cache";
  }
  return "unknown";
}

DistributionSource parse_distribution_source(std::string_view text) {
  if (text == "http") return DistributionSource::kHttp;
  if (text == "synthetic") return DistributionSource::kSynthetic;
  if (text == "cache") return DistributionSource::kCache;
  throw ConfigError("unknown distribution source '" + std::string(text) + "'");
}

// ------------------------------------------------------ LabelDistribution

double LabelDistribution::prob(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return probs[i];
  }
  throw ContractViolation("label '" + std::string(label) +
                          "' missing from distribution");
}

std::size_t LabelDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

void LabelDistribution::validate() const {
  if (labels.size() != probs.size() || labels.size() < 2) {
    throw ContractViolation("distribution does not cover the label set");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ContractViolation("distribution has a non-positive probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractViolation("distribution sums to " + std::to_string(sum));
  }
}

LabelDistribution LabelDistribution::from_scores(
    std::vector<std::string> labels, std::span<const double> scores,
    DistributionSource source) {
  if (labels.size() != scores.size()) {
    throw ContractViolation("label/score size mismatch");
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> probs(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    probs[i] = std::exp(scores[i] - top);
    sum += probs[i];
  }
  for (double& p : probs) {
    // exp() of a very negative gap underflows; clamp so every label keeps
    // positive mass.
    p = std::max(p / sum, std::numeric_limits<double>::min());
  }
  return {std::move(labels), std::move(probs), source};
}

// -------------------------------------------------------------- Synthetic

void SyntheticModelParams::validate() const {
  for (const auto& [label, b] : bias) {
    if (!std::isfinite(b)) {
      throw ConfigError("synthetic bias for '" + label + "' is not finite");
    }
  }
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw ConfigError("synthetic alpha must be finite and >= 0");
  }
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw ConfigError("synthetic temperature must be finite and > 0");
  }
}

json SyntheticModelParams::to_json() const {
  return {{"bias", bias}, {"alpha", alpha}, {"temperature", temperature}};
}

SyntheticModelParams SyntheticModelParams::from_json(const json& j) {
  SyntheticModelParams p;
  try {
    if (j.contains("bias")) {
      p.bias = j.at("bias").get<std::map<std::string, double>>();
    }
    p.alpha = j.value("alpha", p.alpha);
    p.temperature = j.value("temperature", p.temperature);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid synthetic params: ") + e.what());
  }
  p.validate();
  return p;
}

std::set<std::string> tokenize(std::string_view text) {
  std::set<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else if (!current.empty()) {
      tokens.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.insert(std::move(current));
  return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a) shared += b.count(t);
  return static_cast<double>(shared) /
         static_cast<double>(a.size() + b.size() - shared);
}

LabelDistribution synthetic_score(const SyntheticModelParams& params,
                                  std::span<const std::string> demo_texts,
                                  std::span<const std::string> demo_labels,
                                  std::string_view query_text,
                                  const LabelSet& label_set) {
  if (demo_texts.size() != demo_labels.size()) {
    throw ContractViolation("demo text/label size mismatch");
  }
  const auto query_tokens = tokenize(query_text);
  std::vector<double> best_overlap(label_set.size(), 0.0);
  for (std::size_t i = 0; i < demo_texts.size(); ++i) {
    const std::size_t l = label_set.index_of(demo_labels[i]);
    best_overlap[l] =
        std::max(best_overlap[l], jaccard(query_tokens, tokenize(demo_texts[i])));
  }
  std::vector<double> scores(label_set.size());
  for (std::size_t l = 0; l < label_set.size(); ++l) {
    auto it = params.bias.find(label_set.labels()[l]);
    const double b = it == params.bias.end() ? 0.0 : it->second;
    scores[l] = (b + params.alpha * best_overlap[l]) / params.temperature;
  }
  return LabelDistribution::from_scores(label_set.labels(), scores,
                                        DistributionSource::kSynthetic);
}

SyntheticBackend::SyntheticBackend(SyntheticModelParams params)
    : params_(std::move(params)) {
  params_.validate();
}

BackendResponse SyntheticBackend::query(const TaskSpec& task,
                                        std::span<const Example> demos,
                                        const FieldMap& query_fields) const {
  std::vector<std::string> texts;
  std::vector<std::string> labels;
  texts.reserve(demos.size());
  labels.reserve(demos.size());
  for (const auto& d : demos) {
    texts.push_back(task.input_text(d.fields));
    labels.push_back(d.label);
  }
  return {synthetic_score(params_, texts, labels, task.input_text(query_fields),
                          task.label_set()),
          {}};
}

json SyntheticBackend::identity() const {
  return {{"backend", "synthetic"}, {"params", params_.to_json()}};
}

// ------------------------------------------------------------------- HTTP

LabelDistribution distribution_from_top_logprobs(
    std::span<const TokenLogprob> top, const LabelSet& label_set,
    std::string_view raw_response) {
  const auto& norm = label_set.normalization();
  std::vector<std::string> targets;
  for (const auto& label : label_set.labels()) {
    targets.push_back(norm.apply(label_set.verbalizer(label)));
  }
  constexpr double kUnset = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(targets.size(), kUnset);
  for (const auto& entry : top) {
    const std::string token = norm.apply(entry.token);
    for (std::size_t l = 0; l < targets.size(); ++l) {
      if (token != targets[l]) continue;
      if (scores[l] == kUnset) {
        scores[l] = entry.logprob;
      } else {
        const double hi = std::max(scores[l], entry.logprob);
        const double lo = std::min(scores[l], entry.logprob);
        scores[l] = hi + std::log1p(std::exp(lo - hi));
      }
    }
  }
  double lowest = std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (s != kUnset) lowest = std::min(lowest, s);
  }
  if (!std::isfinite(lowest)) {
    throw ExtractionError("no verbalizer matched the top logprobs",
                          std::string(raw_response));
  }
  for (double& s : scores) {
    if (s == kUnset) s = lowest - 10.0;
  }
  return LabelDistribution::from_scores(label_set.labels(), scores,
                                        DistributionSource::kHttp);
}

std::vector<TokenLogprob> parse_completion_top_logprobs(std::string_view body) {
  std::vector<TokenLogprob> out;
  try {
    const json response = json::parse(body);
    const json& top =
        response.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
    for (const auto& [token, logprob] : top.items()) {
      out.push_back({token, logprob.get<double>()});
    }
  } catch (const json::exception& e) {
    throw ExtractionError(
        std::string("completion response lacks top logprobs: ") + e.what(),
        std::string(body));
  }
  // Sort for a deterministic combination order regardless of JSON layout.
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.token < b.token;
  });
  return out;
}

std::pair<std::string, std::string> split_base_url(std::string_view base_url) {
  const std::size_t scheme = base_url.find("://");
  if (scheme == std::string_view::npos) {
    throw ConfigError("base URL '" + std::string(base_url) +
                      "' lacks a scheme");
  }
  const std::size_t slash = base_url.find('/', scheme + 3);
  if (slash == std::string_view::npos) return {std::string(base_url), ""};
  std::string prefix(base_url.substr(slash));
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::string(base_url.substr(0, slash)), prefix};
}

HttpCompletionsBackend::HttpCompletionsBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  if (config_.top_logprobs < 20) {
    throw ConfigError("top_logprobs must be at least 20");
  }
  if (config_.max_attempts < 1) {
    throw ConfigError("max_attempts must be at least 1");
  }
  split_base_url(config_.base_url);  // validates
}

json HttpCompletionsBackend::identity() const {
  return {{"backend", "http"},
          {"base_url", config_.base_url},
          {"model", config_.model},
          {"params",
           {{"max_tokens", 1},
            {"temperature", 0},
            {"logprobs", config_.top_logprobs}}}};
}

std::string HttpCompletionsBackend::post_json(const std::string& path,
                                              const json& body) const {
  const auto [host, prefix] = split_base_url(config_.base_url);
  const std::string payload = body.dump();
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    if (attempt > 0) {
      std::uniform_real_distribution<double> jitter(0.5, 1.5);
      const double ms = static_cast<double>(config_.initial_backoff.count()) *
                        std::pow(2.0, attempt - 1) * jitter(jitter_rng);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long long>(ms)));
    }
    httplib::Client client(host);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    requests_sent_.fetch_add(1);
    auto result =
        client.Post(prefix + path, headers, payload, "application/json");
    if (!result) {
      last_error = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    const int status = result->status;
    if (status >= 200 && status < 300) return result->body;
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status) + ": " + result->body;
      continue;
    }
    throw ConfigError("HTTP " + std::to_string(status) + " from " + host +
                      prefix + path + ": " + result->body);
  }
  throw BackendError("request to " + host + prefix + path + " failed after " +
                     std::to_string(config_.max_attempts) +
                     " attempts: " + last_error);
}

BackendResponse HttpCompletionsBackend::score_prompt(
    const std::string& prompt_text, const LabelSet& label_set) const {
  if (prompt_text.empty()) throw ContractViolation("empty prompt");
  if (auto multi = label_set.multi_token_verbalizers(); !multi.empty()) {
    throw ConfigError("verbalizer of label '" + multi.front() +
                      "' looks multi-token; first-token extraction needs "
                      "single-token verbalizers");
  }
  const json body = {{"model", config_.model},
                     {"prompt", prompt_text},
                     {"max_tokens", 1},
                     {"logprobs", config_.top_logprobs},
                     {"temperature", 0}};
  std::string raw = post_json("/v1/completions", body);
  auto top = parse_completion_top_logprobs(raw);
  auto dist = distribution_from_top_logprobs(top, label_set, raw);
  return {std::move(dist), std::move(raw)};
}

BackendResponse HttpCompletionsBackend::query(
    const TaskSpec& task, std::span<const Example> demos,
    const FieldMap& query_fields) const {
  return score_prompt(render_prompt(task, demos, query_fields),
                      task.label_set());
}

}  // namespace icr
