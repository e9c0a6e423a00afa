// Copyright 2026 The ptdisc Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ptdisc {

/// Machine-readable failure categories. The names double as the wire codes
/// returned by the labeling service.
enum class ErrorCode {
  kEmptyPhrase,
  kParseError,
  kDuplicateId,
  kNegativeCount,
  kIoError,
  kDegenerateCorpus,
  kSchemaMismatch,
  kEmptyLexicon,
  kEmptyPool,
  kUnknownPhrase,
  kDuplicateDecision,
  kEmptyTruth,
  kConfigError,
  kUnknownSession,
  kStaleBatch,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyPhrase: return "EmptyPhrase";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kNegativeCount: return "NegativeCount";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDegenerateCorpus: return "DegenerateCorpus";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kEmptyLexicon: return "EmptyLexicon";
    case ErrorCode::kEmptyPool: return "EmptyPool";
    case ErrorCode::kUnknownPhrase: return "UnknownPhrase";
    case ErrorCode::kDuplicateDecision: return "DuplicateDecision";
    case ErrorCode::kEmptyTruth: return "EmptyTruth";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kStaleBatch: return "StaleBatch";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }
  /// 1-based input line for ParseError / NegativeCount, when known.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

}  // namespace ptdisc
