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

// Deterministic offline backends.
//
// MockGenerator runs a tiny token-level language model whose logits are a
// hash of (prompt text, language, position, previous token). Sampling goes
// through mock_next_token, so temperature and min-p behave exactly as they
// would on a real vocabulary. All randomness is a pure function of the seed
// and the request.

#pragma once

#include <chrono>
#include <string>

#include "polysel/backends.hpp"

namespace polysel {

class MockGenerator final : public GenerationBackend {
 public:
  /// options: vocab_size (default 24), max_length (default 16),
  /// latency_ms (default 0).
  explicit MockGenerator(const BackendDescriptor& d);

  const std::string& id() const override { return id_; }
  std::vector<Sample> generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                               const std::optional<LanguageTag>& respond_in, CallLedger& ledger) override;

  /// Logits the model emits at `position` after `previous` (for tests).
  std::vector<double> logits(std::uint64_t context, std::size_t position, std::size_t previous) const;

 private:
  std::string id_;
  std::size_t vocab_size_;
  std::size_t max_length_;
  std::chrono::milliseconds latency_;
};

/// Rule-based judge. options.mode is one of prefer_longer (default),
/// prefer_shorter, tie, prefer_first, prefer_second. Length ties resolve to
/// Tie, so identical texts always tie.
class MockJudge final : public JudgeBackend {
 public:
  MockJudge(const BackendDescriptor& d, const JudgeTemplates& templates);

  const std::string& id() const override { return id_; }
  std::string template_version(PairKind kind) const override;
  std::string template_version(ChecklistMode mode) const override;
  Preference pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                      CallLedger& ledger) override;
  OnePassVerdict one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                          CallLedger& ledger) override;

 private:
  std::string id_;
  std::string mode_;
  JudgeTemplates templates_;
};

/// options.mode: "length" (default) scores min(1, characters / 1000);
/// "constant" returns options.value.
class MockReward final : public RewardBackend {
 public:
  explicit MockReward(const BackendDescriptor& d);

  const std::string& id() const override { return id_; }
  double score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) override;

 private:
  std::string id_;
  std::string mode_;
  double value_;
};

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

}  // namespace polysel
