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

// Domain types shared by every module. Nothing in here performs I/O.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polysel/error.hpp"

namespace polysel {

/// Lowercase ISO-639-1 style language code ("en", "ja", "zh", ...).
class LanguageTag {
 public:
  /// Throws Error(InvalidLanguage) unless `code` is non-empty ASCII lowercase.
  explicit LanguageTag(std::string code);

  const std::string& code() const noexcept { return code_; }
  bool is_english() const noexcept { return code_ == "en"; }
  /// English display name used in instructions ("Japanese"); falls back to
  /// the code itself for languages without a known name.
  std::string display_name() const;

  friend bool operator==(const LanguageTag&, const LanguageTag&) = default;
  friend auto operator<=>(const LanguageTag&, const LanguageTag&) = default;

 private:
  std::string code_;
};

enum class TaskKind { OpenEnded, MathReasoning, MachineTranslation };

std::string_view to_string(TaskKind kind);
/// Accepts the canonical names plus the benchmark aliases arena/mgsm/wmt.
TaskKind parse_task_kind(std::string_view name);

struct PromptRecord {
  std::string id;
  LanguageTag language{"en"};
  TaskKind task = TaskKind::OpenEnded;
  std::string text;
  std::optional<std::string> reference;  // gold translation
  std::optional<std::string> answer;     // gold final answer

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

void validate_prompt_record(const PromptRecord& record);

inline constexpr double kMaxTemperature = 2.0;

struct DecodeParams {
  double temperature = 0.0;
  double min_p = 0.0;  // 0 disables pruning
  int max_tokens = 512;
  std::optional<std::uint64_t> seed;

  bool greedy() const noexcept { return temperature == 0.0; }
  /// Throws Error(InvalidParams) when a guard is violated.
  void validate() const;

  friend bool operator==(const DecodeParams&, const DecodeParams&) = default;
};

enum class Provenance { Greedy, Stochastic, CrossLingualEvidence };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Sample {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;  // natural log, completion tokens only
  DecodeParams params;
  LanguageTag language{"en"};
  Provenance provenance = Provenance::Stochastic;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Candidate set for one prompt.
///
/// The in-language evidence set is a subset of the hypotheses, addressed by
/// index. When `in_language_evidence` is empty it aliases the full
/// hypothesis list, which is the default MBR configuration.
struct SamplePool {
  std::string prompt_id;
  LanguageTag target_language{"en"};
  std::vector<Sample> hypotheses;
  std::optional<std::vector<std::size_t>> in_language_evidence;
  std::vector<Sample> cross_lingual_evidence;

  /// Indices of hypotheses that serve as in-language evidence.
  std::vector<std::size_t> evidence_indices() const;
  /// Index of the greedy hypothesis, if present.
  std::optional<std::size_t> greedy_index() const;
  /// Throws Error(InvalidConfig) when a pool invariant is broken.
  void validate() const;

  friend bool operator==(const SamplePool&, const SamplePool&) = default;
};

enum class Strategy { Likelihood, SimMBR, RewardBoN, JudgeMBR, XMBR, CHOPS };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct CallLedger {
  std::uint64_t generation_calls = 0;
  std::uint64_t judge_pairwise_calls = 0;
  std::uint64_t judge_onepass_calls = 0;
  std::uint64_t reward_calls = 0;
  std::uint64_t cached_hits = 0;

  std::uint64_t live_calls() const noexcept {
    return generation_calls + judge_pairwise_calls + judge_onepass_calls + reward_calls;
  }
  CallLedger& operator+=(const CallLedger& other) noexcept;
  friend CallLedger operator+(CallLedger a, const CallLedger& b) noexcept { return a += b; }
  friend bool operator==(const CallLedger&, const CallLedger&) = default;
};

struct SelectionOutcome {
  Strategy strategy = Strategy::Likelihood;
  std::size_t chosen_index = 0;
  std::vector<double> per_candidate_score;  // utility, or negated risk
  CallLedger ledger;
  std::optional<std::string> rationale;

  friend bool operator==(const SelectionOutcome&, const SelectionOutcome&) = default;
};

/// Lowest index among the maxima. Precondition: `scores` is non-empty.
std::size_t first_argmax(std::span<const double> scores);
/// Lowest index among the minima. Precondition: `scores` is non-empty.
std::size_t first_argmin(std::span<const double> scores);

}  // namespace polysel
