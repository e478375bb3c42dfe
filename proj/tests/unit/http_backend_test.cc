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

#include <chrono>
#include <string>
#include <vector>

#include <doctest.h>

#include "icr/backend.h"
#include "icr/embedding.h"
#include "icr/errors.h"
#include "test_support.h"

namespace icr {
namespace {

using testing::MockOpenAiServer;

HttpBackendConfig config_for(const MockOpenAiServer& server) {
  HttpBackendConfig config;
  config.base_url = server.base_url();
  config.model = "mock-model";
  config.initial_backoff = std::chrono::milliseconds(1);
  config.timeout = std::chrono::seconds(5);
  return config;
}

const TaskSpec& task() {
  static const TaskSpec t = testing::binary_task("http", {"yes", "no"});
  return t;
}

TEST_CASE("requests carry the completion contract") {
  MockOpenAiServer server;
  HttpBackendConfig config = config_for(server);
  config.api_key = "sk-test";
  const HttpCompletionsBackend backend(config);
  const std::vector<Example> demos = {{0, {{"text", "a"}}, "yes"}};
  const auto response = backend.query(task(), demos, {{"text", "b"}});
  CHECK_NOTHROW(response.distribution.validate());
  CHECK(response.distribution.source == DistributionSource::kHttp);
  CHECK_FALSE(response.raw.empty());

  const auto request = server.last_request();
  CHECK(request["model"] == "mock-model");
  CHECK(request["prompt"] == "Text: a\nAnswer: yes\n\nText: b\nAnswer: ");
  CHECK(request["max_tokens"] == 1);
  CHECK(request["logprobs"] == 20);
  CHECK(request["temperature"] == 0);
  CHECK(server.last_authorization() == "Bearer sk-test");
  CHECK(server.completion_requests() == 1);
}

TEST_CASE("distribution matches the served logprobs") {
  MockOpenAiServer server;
  server.set_completion_handler([](const nlohmann::json&) {
    return nlohmann::json::parse(R"({"choices":[{"text":" yes","logprobs":
      {"tokens":[" yes"],"token_logprobs":[-0.1],
       "top_logprobs":[{" yes":-0.1," no":-2.4," maybe":-5.0}]}}]})");
  });
  const HttpCompletionsBackend backend(config_for(server));
  const auto d = backend.label_distribution(task(), {}, {{"text", "q"}});
  CHECK(d.prob("yes") == doctest::Approx(0.9088770389851438).epsilon(1e-12));
}

TEST_CASE("429 and 5xx are retried") {
  MockOpenAiServer server;
  server.fail_next(2, 429);
  const HttpCompletionsBackend backend(config_for(server));
  CHECK_NOTHROW(backend.label_distribution(task(), {}, {{"text", "q"}}));
  CHECK(server.completion_requests() == 3);
  CHECK(backend.requests_sent() == 3);

  server.fail_next(3, 503);
  CHECK_THROWS_AS(backend.label_distribution(task(), {}, {{"text", "q"}}),
                  BackendError);
  CHECK(server.completion_requests() == 6);
}

TEST_CASE("other 4xx responses are configuration errors, not retried") {
  MockOpenAiServer server;
  server.fail_next(1, 401);
  const HttpCompletionsBackend backend(config_for(server));
  CHECK_THROWS_AS(backend.label_distribution(task(), {}, {{"text", "q"}}),
                  ConfigError);
  CHECK(server.completion_requests() == 1);
}

TEST_CASE("transport failures exhaust the retries") {
  HttpBackendConfig config;
  config.base_url = "http://127.0.0.1:1";
  config.initial_backoff = std::chrono::milliseconds(1);
  config.timeout = std::chrono::seconds(1);
  const HttpCompletionsBackend backend(config);
  CHECK_THROWS_AS(backend.label_distribution(task(), {}, {{"text", "q"}}),
                  BackendError);
  CHECK(backend.requests_sent() == 3);
}

TEST_CASE("malformed or unmatched responses are extraction errors") {
  MockOpenAiServer server;
  const HttpCompletionsBackend backend(config_for(server));
  server.set_raw_completion_body("{\"choices\":[]}");
  CHECK_THROWS_AS(backend.label_distribution(task(), {}, {{"text", "q"}}),
                  ExtractionError);
  MockOpenAiServer other({" maybe"});
  const HttpCompletionsBackend backend2(config_for(other));
  CHECK_THROWS_AS(backend2.label_distribution(task(), {}, {{"text", "q"}}),
                  ExtractionError);
}

TEST_CASE("multi-token verbalizers are refused before any request") {
  MockOpenAiServer server;
  const HttpCompletionsBackend backend(config_for(server));
  const TaskSpec multi("m", LabelSet({"a", "b"}, {{"a", "not hate"}}),
                       "{text} {label}");
  CHECK_THROWS_AS(backend.label_distribution(multi, {}, {{"text", "q"}}),
                  ConfigError);
  CHECK(server.completion_requests() == 0);
}

TEST_CASE("configuration is validated") {
  HttpBackendConfig config;
  config.top_logprobs = 5;
  CHECK_THROWS_AS(HttpCompletionsBackend{config}, ConfigError);
  config = {};
  config.base_url = "nohost";
  CHECK_THROWS_AS(HttpCompletionsBackend{config}, ConfigError);
}

TEST_CASE("identity names model, endpoint and decoding parameters") {
  MockOpenAiServer server;
  const HttpCompletionsBackend backend(config_for(server));
  const auto id = backend.identity();
  CHECK(id["model"] == "mock-model");
  CHECK(id["base_url"] == server.base_url());
  CHECK(id["params"]["logprobs"] == 20);
}

TEST_CASE("http embeddings go through /v1/embeddings") {
  MockOpenAiServer server;
  HttpBackendConfig config = config_for(server);
  config.model = "embed-model";
  const HttpEmbedding provider(config);
  const auto a = provider.embed({"hello world"});
  const auto b = provider.embed({"hello world"});
  CHECK(a.values.size() == 8);
  CHECK(a.values == b.values);
  CHECK(server.embedding_requests() == 2);
  CHECK(cosine_distance(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

}  // namespace
}  // namespace icr
