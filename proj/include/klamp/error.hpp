// Copyright 2026 The klamp Authors.
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

#ifndef KLAMP_ERROR_HPP
#define KLAMP_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace klamp {

enum class ErrorCode {
  kInvalidInput,
  kInvalidEntity,
  kMissingKnowledge,
  kBackendUnavailable,
  kParseFailure,
  kEmptyStore,
  kNotFound,
  kStorage,
};

inline const char *error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kInvalidEntity: return "InvalidEntity";
    case ErrorCode::kMissingKnowledge: return "MissingKnowledge";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kEmptyStore: return "EmptyStore";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kStorage: return "StorageFailure";
  }
  return "Unknown";
}

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string &message)
      : Error(ErrorCode::kInvalidInput, message) {}
};

class InvalidEntity : public Error {
 public:
  explicit InvalidEntity(const std::string &message)
      : Error(ErrorCode::kInvalidEntity, message) {}
};

class MissingKnowledge : public Error {
 public:
  explicit MissingKnowledge(const std::string &message)
      : Error(ErrorCode::kMissingKnowledge, message) {}
};

class EmptyStore : public Error {
 public:
  explicit EmptyStore(const std::string &message)
      : Error(ErrorCode::kEmptyStore, message) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string &message)
      : Error(ErrorCode::kNotFound, message) {}
};

class StorageFailure : public Error {
 public:
  explicit StorageFailure(const std::string &message)
      : Error(ErrorCode::kStorage, message) {}
};

// A remote backend could not be reached or answered with an error. Carries
// the number of attempts made and a suggested delay before retrying.
class BackendUnavailable : public Error {
 public:
  BackendUnavailable(const std::string &message, int attempts,
                     int retry_after_ms)
      : Error(ErrorCode::kBackendUnavailable, message),
        attempts_(attempts),
        retry_after_ms_(retry_after_ms) {}

  int attempts() const { return attempts_; }
  int retry_after_ms() const { return retry_after_ms_; }

 private:
  int attempts_;
  int retry_after_ms_;
};

// Generator output that does not follow the suggestion format. The raw
// text is kept so callers can surface it.
class ParseFailure : public Error {
 public:
  ParseFailure(const std::string &message, std::string raw_output)
      : Error(ErrorCode::kParseFailure, message),
        raw_output_(std::move(raw_output)) {}

  const std::string &raw_output() const { return raw_output_; }

 private:
  std::string raw_output_;
};

}  // namespace klamp

#endif  // KLAMP_ERROR_HPP
