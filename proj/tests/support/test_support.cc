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

#include "test_support.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iterator>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <httplib.h>

#include "icr/util.h"

namespace icr::testing {

namespace fs = std::filesystem;
using nlohmann::json;

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  std::ostringstream name;
  name << "icr-test-" << rd() << "-" << counter++;
  path_ = fs::temp_directory_path() / name.str();
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

TaskSpec binary_task(const std::string& name, std::vector<std::string> labels) {
  return TaskSpec(name, LabelSet(std::move(labels), {}),
                  "Text: {text}\nAnswer: {label}");
}

TaskSpec mood_task() {
  return TaskSpec("mood", LabelSet({"joy", "anger", "sadness"}, {}),
                  "Text: {text}\nMood: {label}");
}

Dataset make_dataset(
    const std::vector<std::pair<std::string, std::string>>& text_label_pairs,
    DatasetRole role) {
  std::vector<Example> examples;
  int id = 0;
  for (const auto& [text, label] : text_label_pairs) {
    examples.push_back({id++, {{"text", text}}, label});
  }
  return Dataset(std::move(examples), role);
}

Dataset oracle_pool() {
  const std::vector<std::string> labels = {"joy", "anger", "sadness"};
  const std::vector<std::vector<std::string>> own = {
      {"sunny", "laugh", "dance", "bright", "smile"},
      {"shout", "rage", "slam", "furious", "storm"},
      {"tears", "gray", "alone", "lost", "rain"}};
  const std::vector<std::string> shared = {"day", "home", "work", "night",
                                           "friend"};
  std::vector<std::pair<std::string, std::string>> rows;
  for (int i = 0; i < 20; ++i) {
    const int l = i % 3;
    std::string second = own[l][(i * 2 + 1) % 5];
    // Every fourth example borrows a word from the next label.
    if (i % 4 == 3) second = own[(l + 1) % 3][i % 5];
    rows.emplace_back(own[l][i % 5] + " " + second + " " + shared[i % 5] +
                          " " + shared[(i * 3 + 2) % 5],
                      labels[l]);
  }
  return make_dataset(rows);
}

SyntheticModelParams oracle_params() {
  SyntheticModelParams params;
  params.bias = {{"joy", 0.2}, {"anger", 0.0}, {"sadness", -0.1}};
  return params;
}

ImbalancedFixture imbalanced_fixture() {
  const std::vector<std::vector<std::string>> clusters = {
      {"volcano", "lava", "eruption", "magma"},
      {"comet", "orbit", "telescope", "nebula"},
      {"glacier", "iceberg", "frost", "tundra"},
      {"reef", "coral", "lagoon", "tide"},
      {"canyon", "mesa", "erosion", "sandstone"}};
  std::vector<std::string> generic;
  for (const char* w :
       {"table", "chair", "paper", "window", "garden", "kettle", "pencil",
        "ladder", "basket", "carpet", "bottle", "button", "candle", "drawer",
        "blanket", "mirror", "pillow", "bucket", "hammer", "saucer", "shelf",
        "wallet", "ribbon", "napkin", "folder", "spoon", "jacket", "helmet",
        "parcel", "ticket"}) {
    generic.emplace_back(w);
  }
  // Three of a cluster's four words; `skip` picks the omitted one.
  auto cluster_text = [&](int c, int skip) {
    std::string text;
    for (int w = 0; w < 4; ++w) {
      if (w == skip) continue;
      if (!text.empty()) text += ' ';
      text += clusters[c][w];
    }
    return text;
  };
  auto generic_text = [&](int i) {
    return generic[(i * 7) % 30] + " " + generic[(i * 11 + 3) % 30] + " " +
           generic[(i * 13 + 5) % 30] + " " + generic[(i * 17 + 9) % 30];
  };

  std::vector<std::pair<std::string, std::string>> pool;
  int yes = 0, no = 0;
  for (int p = 0; p < 60; ++p) {
    if (p % 4 == 3) {
      pool.emplace_back(cluster_text(yes % 5, (yes / 5) % 4), "yes");
      ++yes;
    } else {
      pool.emplace_back(generic_text(no), "no");
      ++no;
    }
  }
  std::vector<std::pair<std::string, std::string>> test;
  for (int q = 0; q < 20; ++q) {
    test.emplace_back(cluster_text(q % 5, (q / 5 + 3) % 4), "yes");
    test.emplace_back(generic_text(q + 45), "no");
  }
  SyntheticModelParams params;
  params.bias = {{"no", 1.0}, {"yes", 0.0}};
  return {binary_task("imbalanced"), make_dataset(pool),
          make_dataset(test, DatasetRole::kTest), params};
}

namespace {

std::vector<std::string> reference_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text + " ") {
    const bool alnum = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                       (ch >= '0' && ch <= '9');
    if (alnum) {
      cur += static_cast<char>(ch >= 'A' && ch <= 'Z' ? ch - 'A' + 'a' : ch);
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double reference_jaccard(const std::vector<std::string>& a,
                         const std::vector<std::string>& b) {
  std::vector<std::string> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(both));
  const double uni = static_cast<double>(a.size() + b.size() - both.size());
  return uni == 0 ? 0.0 : static_cast<double>(both.size()) / uni;
}

}  // namespace

std::vector<double> reference_probs(const SyntheticModelParams& params,
                                    const std::vector<std::string>& labels,
                                    const std::vector<TextLabel>& demos,
                                    const std::string& query) {
  const auto q = reference_tokens(query);
  std::vector<double> weights;
  for (const auto& label : labels) {
    double best = 0.0;
    for (const auto& d : demos) {
      if (d.label == label) {
        best = std::max(best, reference_jaccard(q, reference_tokens(d.text)));
      }
    }
    const auto it = params.bias.find(label);
    const double bias = it == params.bias.end() ? 0.0 : it->second;
    weights.push_back(std::exp((bias + params.alpha * best) /
                               params.temperature));
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return weights;
}

double reference_log_psi(const std::vector<double>& probs,
                         std::size_t gold_index) {
  double wrong = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i != gold_index) wrong = std::max(wrong, probs[i]);
  }
  return std::log(wrong / probs[gold_index]);
}

std::vector<std::vector<int>> reference_icr(const SyntheticModelParams& params,
                                            const std::vector<std::string>& labels,
                                            const Dataset& pool,
                                            std::vector<int> prompt,
                                            std::size_t n, int k) {
  auto text_of = [&](int id) { return pool.find(id)->fields.at("text"); };
  auto label_of = [&](int id) { return pool.find(id)->label; };
  std::vector<std::vector<int>> rounds;
  for (int round = 0; round < k; ++round) {
    std::vector<TextLabel> demos;
    for (int id : prompt) demos.push_back({text_of(id), label_of(id)});
    std::vector<std::pair<double, int>> scored;
    for (const auto& e : pool.examples()) {
      if (std::find(prompt.begin(), prompt.end(), e.id) != prompt.end()) {
        continue;
      }
      const auto probs = reference_probs(params, labels, demos, e.fields.at("text"));
      const auto gold = static_cast<std::size_t>(
          std::find(labels.begin(), labels.end(), e.label) - labels.begin());
      scored.push_back({reference_log_psi(probs, gold), e.id});
    }
    // Highest score first; lowest id among equals.
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> next;
    for (std::size_t i = 0; i < n; ++i) next.push_back(scored[i].second);
    next.insert(next.end(), prompt.begin() + static_cast<std::ptrdiff_t>(n),
                prompt.end());
    prompt = next;
    rounds.push_back(prompt);
  }
  return rounds;
}

void write_jsonl(const fs::path& path, const Dataset& dataset) {
  std::string text;
  for (const auto& e : dataset.examples()) {
    text += json{{"text", e.fields.at("text")}, {"label", e.label}}.dump();
    text += '\n';
  }
  write_text(path, text);
}

std::string binary_task_toml(const std::string& name,
                             const std::vector<std::string>& labels) {
  std::string out = "name = \"" + name + "\"\nlabels = [";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += (i ? ", \"" : "\"") + labels[i] + "\"";
  }
  out += "]\ntemplate = \"Text: {text}\\nAnswer: {label}\"\n";
  return out;
}

// --------------------------------------------------------------- server

struct MockOpenAiServer::Impl {
  httplib::Server server;
  mutable std::mutex mu;
  std::vector<std::string> tokens;
  int fail_remaining = 0;
  int fail_status = 500;
  Handler handler;
  std::optional<std::string> raw_body;
  json last_request;
  std::string last_authorization;
};

json MockOpenAiServer::default_completion(const std::vector<std::string>& tokens,
                                          const std::string& prompt) {
  const std::string digest = sha256_hex(prompt);
  json top = json::object();
  std::string best;
  double best_lp = -1e300;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int byte = std::stoi(digest.substr((2 * i) % 60, 2), nullptr, 16);
    const double lp = -(0.05 + 4.0 * byte / 255.0);
    top[tokens[i]] = lp;
    if (lp > best_lp) {
      best_lp = lp;
      best = tokens[i];
    }
  }
  return {{"id", "cmpl-mock"},
          {"object", "text_completion"},
          {"choices",
           json::array({{{"text", best},
                         {"index", 0},
                         {"finish_reason", "length"},
                         {"logprobs",
                          {{"tokens", json::array({best})},
                           {"token_logprobs", json::array({best_lp})},
                           {"top_logprobs", json::array({top})},
                           {"text_offset", json::array({0})}}}}})}};
}

MockOpenAiServer::MockOpenAiServer(std::vector<std::string> tokens)
    : impl_(std::make_unique<Impl>()) {
  impl_->tokens = std::move(tokens);
  impl_->server.Post("/v1/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
    ++completions_;
    std::unique_lock lock(impl_->mu);
    impl_->last_authorization = req.get_header_value("Authorization");
    json request;
    try {
      request = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    impl_->last_request = request;
    if (impl_->fail_remaining > 0) {
      --impl_->fail_remaining;
      res.status = impl_->fail_status;
      res.set_content(R"({"error":"injected"})", "application/json");
      return;
    }
    if (impl_->raw_body) {
      res.set_content(*impl_->raw_body, "application/json");
      return;
    }
    const Handler handler = impl_->handler;
    const std::vector<std::string> tokens = impl_->tokens;
    lock.unlock();
    const json body =
        handler ? handler(request)
                : default_completion(tokens, request.value("prompt", ""));
    res.set_content(body.dump(), "application/json");
  });
  impl_->server.Post("/v1/embeddings", [this](const httplib::Request& req,
                                              httplib::Response& res) {
    ++embeddings_;
    const json request = json::parse(req.body, nullptr, false);
    if (request.is_discarded() || !request.contains("input")) {
      res.status = 400;
      return;
    }
    const std::string digest =
        sha256_hex(request["input"].is_string()
                       ? request["input"].get<std::string>()
                       : request["input"].dump());
    json vector = json::array();
    for (int i = 0; i < 8; ++i) {
      vector.push_back(std::stoi(digest.substr(2 * i, 2), nullptr, 16) / 255.0 +
                       0.01);
    }
    res.set_content(
        json{{"object", "list"},
             {"data", json::array({{{"object", "embedding"},
                                    {"index", 0},
                                    {"embedding", vector}}})}}
            .dump(),
        "application/json");
  });
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw std::runtime_error("mock server cannot bind");
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockOpenAiServer::~MockOpenAiServer() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockOpenAiServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(port_);
}

void MockOpenAiServer::fail_next(int count, int status) {
  std::lock_guard lock(impl_->mu);
  impl_->fail_remaining = count;
  impl_->fail_status = status;
}

void MockOpenAiServer::set_completion_handler(Handler handler) {
  std::lock_guard lock(impl_->mu);
  impl_->handler = std::move(handler);
}

void MockOpenAiServer::set_raw_completion_body(std::string body) {
  std::lock_guard lock(impl_->mu);
  impl_->raw_body = std::move(body);
}

json MockOpenAiServer::last_request() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_request;
}

std::string MockOpenAiServer::last_authorization() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_authorization;
}

}  // namespace icr::testing
