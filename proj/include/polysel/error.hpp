// Copyright 2026 The polysel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polysel {

enum class ErrorCode {
  // Records and parameters.
  EmptyPrompt,
  MissingAnswer,
  MissingReference,
  UnexpectedGold,
  InvalidLanguage,
  InvalidParams,
  // Backends.
  InvalidDescriptor,
  BackendTimeout,
  BackendError,
  AuthMissing,
  MalformedResponse,
  UnparseableVerdict,
  IndexOutOfRange,
  NonFiniteLogits,
  CacheCorrupt,
  // Sampling.
  InvalidConfig,
  PartialPool,
  // Selection.
  EmptyEvidence,
  MissingLogprobs,
  ContextOverflow,
  EmptyMatrix,
  // Metrics.
  ZeroGreedyScore,
  EmptyRecords,
  // Harness.
  ParseError,
  DuplicateId,
  ValidationError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace polysel
