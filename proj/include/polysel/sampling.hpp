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

// Sampling plans and pool assembly.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"

namespace polysel {

enum class SamplingStrategy { SingleTemp, MultiTemp, HedgedSingleTemp, HedgedMultiTemp };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy parse_sampling_strategy(std::string_view name);

/// Chooses the language of cross-lingual evidence samples.
struct EvidenceLanguageRule {
  enum class Kind { Default, Fixed, RandomFromSet };

  Kind kind = Kind::Default;
  std::vector<LanguageTag> languages;  // one entry for Fixed, the pool for RandomFromSet

  static EvidenceLanguageRule default_rule() { return {}; }
  static EvidenceLanguageRule fixed(LanguageTag language) { return {Kind::Fixed, {std::move(language)}}; }
  static EvidenceLanguageRule random_from(std::vector<LanguageTag> languages) {
    return {Kind::RandomFromSet, std::move(languages)};
  }

  /// Language for the evidence sample at `draw`. Default maps English to
  /// Chinese and everything else to English. RandomFromSet never returns the
  /// target when another option exists.
  LanguageTag resolve(const LanguageTag& target, std::uint64_t draw) const;

  friend bool operator==(const EvidenceLanguageRule&, const EvidenceLanguageRule&) = default;
};

struct SamplingPlan {
  SamplingStrategy strategy = SamplingStrategy::HedgedSingleTemp;
  int n = 5;
  double temperature = 0.7;
  std::vector<double> temperature_menu{0.0, 0.3, 0.7, 0.8, 0.9, 1.0};
  double min_p = 0.2;
  int max_tokens = 512;
  std::uint64_t seed = 0;
  int evidence_m = 3;
  EvidenceLanguageRule evidence_rule;

  bool hedged() const noexcept {
    return strategy == SamplingStrategy::HedgedSingleTemp || strategy == SamplingStrategy::HedgedMultiTemp;
  }
  bool multi_temperature() const noexcept {
    return strategy == SamplingStrategy::MultiTemp || strategy == SamplingStrategy::HedgedMultiTemp;
  }
  /// Throws Error(InvalidConfig), or Error(InvalidParams) for decode guards.
  void validate() const;
  /// Same plan with a different pool size. Slot i keeps its parameters.
  SamplingPlan resized(int new_n) const;
  /// Decode parameters for stochastic evidence draws.
  DecodeParams evidence_params(std::size_t j) const;

  friend bool operator==(const SamplingPlan&, const SamplingPlan&) = default;
};

/// Builds a validated plan from a JSON object. Absent keys keep the
/// defaults above. Keys: strategy, n, temperature, temperature_menu, min_p,
/// max_tokens, seed, evidence_m, evidence_language ("default", a language
/// code, or a list of codes for random choice).
SamplingPlan build_plan(const nlohmann::json& config);

nlohmann::json plan_to_json(const SamplingPlan& plan);

/// One DecodeParams per slot; hedged plans put the greedy slot first.
/// Stochastic slot i is seeded with plan.seed + i.
std::vector<DecodeParams> materialize_slots(const SamplingPlan& plan);

/// Generates one sample per slot (`parallelism` slots at a time) and folds
/// them in slot order. Calls made are added to `ledger` even on failure.
/// Throws Error(PartialPool) naming failed slots when some slots succeed,
/// otherwise rethrows the first slot's error.
SamplePool assemble_pool(GenerationBackend& backend, const PromptRecord& prompt, const SamplingPlan& plan,
                         CallLedger& ledger, std::size_t parallelism = 1);

/// Returns `pool` with plan.evidence_m evidence samples appended. Throws
/// Error(InvalidConfig) when evidence_m < 1.
SamplePool extend_evidence(GenerationBackend& backend, const PromptRecord& prompt, const SamplePool& pool,
                           const SamplingPlan& plan, CallLedger& ledger, std::size_t parallelism = 1);

}  // namespace polysel
