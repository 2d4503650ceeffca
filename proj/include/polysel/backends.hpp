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

// Backend interfaces for generation, judging and reward scoring.
//
// Every call takes the caller's CallLedger and increments exactly one
// counter per real backend invocation. Cache hits never reach an
// implementation; the caching layer records them as `cached_hits`.

#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polysel/core.hpp"
#include "polysel/templates.hpp"
#include "polysel/util.hpp"

namespace polysel {

enum class BackendKind { HttpGeneration, HttpJudge, HttpReward, Mock, Synthetic };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct BackendDescriptor {
  std::string id;
  BackendKind kind = BackendKind::Mock;
  std::optional<std::string> endpoint;
  std::optional<std::string> model_name;
  std::optional<std::string> auth_env_var;
  int max_concurrency = 4;
  std::chrono::milliseconds timeout{60'000};
  int retry_limit = 2;
  /// Kind-specific settings (mock modes, synthetic profiles, HTTP extras).
  nlohmann::json options = nlohmann::json::object();

  /// Throws Error(InvalidDescriptor) on a malformed descriptor.
  void validate() const;
};

enum class Verdict { FirstWins, SecondWins, Tie };

std::string_view to_string(Verdict v);
Verdict parse_verdict_name(std::string_view name);
/// FirstWins <-> SecondWins; Tie is its own mirror.
Verdict mirror(Verdict v);

struct Preference {
  Verdict verdict = Verdict::Tie;
  std::string raw_text;

  friend bool operator==(const Preference&, const Preference&) = default;
};

struct OnePassVerdict {
  std::size_t chosen_index = 0;
  std::string rationale;

  friend bool operator==(const OnePassVerdict&, const OnePassVerdict&) = default;
};

/// Pairwise comparisons are in-language (hypothesis vs hypothesis) or
/// cross-lingual (hypothesis vs evidence in another language).
enum class PairKind { InLanguage, CrossLingual };

/// How a one-pass judge builds its criteria.
enum class ChecklistMode {
  InCall,        // checklist and selection in a single call
  Off,           // plain one-pass selection without a checklist
  SeparateCall,  // checklist generated by a first call, selection by a second
};

std::string_view to_string(ChecklistMode mode);
ChecklistMode parse_checklist_mode(std::string_view name);

/// Parses a pairwise verdict ("Winner: A|B|Tie", or [[A]]/[[B]]/[[C]]).
/// The last recognizable verdict wins. Throws Error(UnparseableVerdict).
Verdict parse_preference(std::string_view raw);

/// Parses "Best response: <k>" (1-based) into a zero-based index. Throws
/// Error(UnparseableVerdict) or Error(IndexOutOfRange).
std::size_t parse_one_pass(std::string_view raw, std::size_t candidate_count);

/// Digest of the template text(s) a judge call of this kind uses.
std::string pairwise_template_version(const JudgeTemplates& templates, PairKind kind);
std::string one_pass_template_version(const JudgeTemplates& templates, ChecklistMode mode);

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual const std::string& id() const = 0;
  /// Version tag of any prompt template the backend applies (cache key).
  virtual std::string template_version() const { return "none"; }
  virtual bool provides_logprobs() const { return true; }
  /// Returns exactly `n` samples. When `respond_in` is set the model is
  /// instructed to answer in that language and samples are stamped with it.
  virtual std::vector<Sample> generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                                       const std::optional<LanguageTag>& respond_in, CallLedger& ledger) = 0;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual const std::string& id() const = 0;
  virtual std::string template_version(PairKind kind) const = 0;
  virtual std::string template_version(ChecklistMode mode) const = 0;
  /// Compares `a` (candidate) against `b` (pseudo-reference).
  virtual Preference pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                              CallLedger& ledger) = 0;
  virtual OnePassVerdict one_pass(const PromptRecord& prompt, std::span<const Sample> candidates,
                                  ChecklistMode mode, CallLedger& ledger) = 0;
};

class RewardBackend {
 public:
  virtual ~RewardBackend() = default;
  virtual const std::string& id() const = 0;
  virtual double score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) = 0;
};

/// Probabilities after temperature scaling and min-p pruning, renormalized.
/// Pruned entries are exactly zero. Greedy params yield a one-hot vector on
/// the first maximal logit. Throws Error(NonFiniteLogits).
std::vector<double> token_distribution(std::span<const double> logits, const DecodeParams& params);

/// Draws the next token index according to `token_distribution`.
std::size_t mock_next_token(std::span<const double> logits, const DecodeParams& params, DeterministicRng& rng);

// Factories. Each validates the descriptor against the role it is used in.
std::unique_ptr<GenerationBackend> make_generation_backend(const BackendDescriptor& d, const JudgeTemplates& templates);
std::unique_ptr<JudgeBackend> make_judge_backend(const BackendDescriptor& d, const JudgeTemplates& templates);
std::unique_ptr<RewardBackend> make_reward_backend(const BackendDescriptor& d);

}  // namespace polysel
