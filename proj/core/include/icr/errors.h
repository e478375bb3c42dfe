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

#ifndef ICR_ERRORS_H_
#define ICR_ERRORS_H_

#include <stdexcept>
#include <string>

namespace icr {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, flags, or inputs detected before any work starts.
// The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A data file could not be turned into a Dataset.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

// Transport or provider failure after retries were exhausted.
class BackendError : public Error {
 public:
  using Error::Error;
};

// The provider answered, but no label could be read from the response.
class ExtractionError : public BackendError {
 public:
  ExtractionError(const std::string& message, std::string raw)
      : BackendError(message), raw_(std::move(raw)) {}

  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// Scoring a specific example failed; carries the example id.
class ScoringError : public BackendError {
 public:
  ScoringError(int example_id, const std::string& cause)
      : BackendError("scoring failed for example " +
                     std::to_string(example_id) + ": " + cause),
        example_id_(example_id) {}

  int example_id() const { return example_id_; }

 private:
  int example_id_;
};

// A keyed lookup (embedding id, artifact field) found nothing.
class LookupError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace icr

#endif  // ICR_ERRORS_H_
