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

// Synthetic-quality simulator.
//
// Each generated sample carries a hidden quality scalar in [0, 1] drawn from
// N(mu(tau), sigma(tau)) and clipped, where
//
//   mu(tau)    = base_quality - decay_rate * max(0, tau - breakpoint)^2
//   sigma(tau) = noise_rate * tau
//
// The scalar is embedded in the text as a trailing marker so that judges,
// reward models and oracle scorers can recover it from the sample alone.
// Body words drift away from a per-prompt reference wording at a rate of
// (1 - quality), which gives similarity-based selection a real signal.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "polysel/backends.hpp"

namespace polysel {

struct SyntheticProfile {
  double base_quality = 0.6;  // mu0 in (0, 1]
  double breakpoint = 0.7;    // tau_break >= 0
  double decay_rate = 1.0;    // a >= 0
  double noise_rate = 0.2;    // b >= 0

  double mean_quality(double temperature) const;
  double quality_stddev(double temperature) const;
  /// Throws Error(InvalidDescriptor) when outside the documented ranges.
  void validate() const;
};

/// Per-language profiles with a fallback for unlisted languages.
struct SyntheticProfiles {
  std::map<std::string, SyntheticProfile> by_language;
  SyntheticProfile fallback;

  const SyntheticProfile& for_language(const LanguageTag& language) const;
  /// Parses options.profiles: {"en": {...}, "default": {...}}.
  static SyntheticProfiles from_options(const nlohmann::json& options);
};

/// Appends the hidden-quality marker to `body`.
std::string synthetic_text(double quality, std::string_view body = "synthetic response");
/// Hidden quality of a synthetic text, if it carries a marker.
std::optional<double> synthetic_quality(std::string_view text);
/// Hidden quality or Error(MalformedResponse).
double require_synthetic_quality(std::string_view text);

class SyntheticGenerator final : public GenerationBackend {
 public:
  /// options: profiles, words (body length, default 16).
  explicit SyntheticGenerator(const BackendDescriptor& d);

  const std::string& id() const override { return id_; }
  std::vector<Sample> generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                               const std::optional<LanguageTag>& respond_in, CallLedger& ledger) override;

  const SyntheticProfiles& profiles() const { return profiles_; }

 private:
  std::string id_;
  SyntheticProfiles profiles_;
  std::size_t words_;
};

/// Judge that compares hidden qualities. options.noise is the probability
/// that a verdict flips (pairwise) or that a one-pass choice is replaced by
/// a uniformly random candidate; 0 makes it an oracle. options.seed keys
/// the noise stream.
class SyntheticJudge final : public JudgeBackend {
 public:
  SyntheticJudge(const BackendDescriptor& d, const JudgeTemplates& templates);

  const std::string& id() const override { return id_; }
  std::string template_version(PairKind kind) const override;
  std::string template_version(ChecklistMode mode) const override;
  Preference pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                      CallLedger& ledger) override;
  OnePassVerdict one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                          CallLedger& ledger) override;

 private:
  std::string id_;
  double noise_;
  std::uint64_t seed_;
  JudgeTemplates templates_;
};

/// Reward equal to the hidden quality plus optional Gaussian noise
/// (options.noise, default 0).
class SyntheticReward final : public RewardBackend {
 public:
  explicit SyntheticReward(const BackendDescriptor& d);

  const std::string& id() const override { return id_; }
  double score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) override;

 private:
  std::string id_;
  double noise_;
  std::uint64_t seed_;
};

}  // namespace polysel
