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

// Selection strategies over a SamplePool.
//
// Risk-based strategies record every pairwise loss in a RiskTable whose
// columns are [hypotheses..., cross-lingual evidence...]. Column j < N is
// hypothesis j used as in-language evidence.

#pragma once

#include <cstddef>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"

namespace polysel {

enum class PairMode {
  Single,      // each unordered pair judged once, reverse loss is the complement
  BothOrders,  // each pair judged in both positions; disagreement becomes a tie
  Ordered,     // every (candidate, evidence) comparison is its own call
};

std::string_view to_string(PairMode mode);
PairMode parse_pair_mode(std::string_view name);

struct SelectionOptions {
  PairMode pair_mode = PairMode::Single;
  bool length_normalize = false;
  ChecklistMode checklist = ChecklistMode::InCall;
  /// Upper bound for one-pass judging, estimated at four characters a token.
  std::size_t context_budget_tokens = 32'768;
  std::size_t parallelism = 1;
  /// When false, X-MBR on a pool without cross-lingual evidence reduces to
  /// Judge MBR instead of raising EmptyEvidence.
  bool require_evidence = true;
};

class PairwiseLoss {
 public:
  /// Throws Error(InvalidParams) outside [0, 1].
  explicit PairwiseLoss(double value);

  /// Loss of the first (candidate) position: win 0, tie 0.5, loss 1.
  static PairwiseLoss from_verdict(Verdict v);
  /// 1 - similarity.
  static PairwiseLoss from_similarity(double similarity);

  double value() const noexcept { return value_; }
  PairwiseLoss complement() const { return PairwiseLoss(1.0 - value_); }

  friend bool operator==(const PairwiseLoss&, const PairwiseLoss&) = default;

 private:
  double value_;
};

class RiskTable {
 public:
  RiskTable(std::size_t hypotheses, std::size_t columns);

  /// Adds the loss of `hypothesis` against evidence `column`. Each cell may
  /// be recorded once; a second record throws Error(InvalidParams).
  void record(std::size_t hypothesis, std::size_t column, PairwiseLoss loss);

  std::size_t hypotheses() const noexcept { return risk_.size(); }
  std::size_t columns() const noexcept { return columns_; }
  const std::vector<double>& risk() const noexcept { return risk_; }
  const std::map<std::pair<std::size_t, std::size_t>, PairwiseLoss>& pair_cache() const noexcept { return cache_; }
  /// Risk rebuilt from pair_cache alone.
  std::vector<double> recompute() const;
  /// Dense hypotheses x columns matrix; unrecorded cells are 0.
  std::vector<std::vector<double>> as_matrix() const;
  /// First index of minimal risk.
  std::size_t best() const { return first_argmin(risk_); }

 private:
  std::size_t columns_;
  std::vector<double> risk_;
  std::map<std::pair<std::size_t, std::size_t>, PairwiseLoss> cache_;
};

/// Jaccard index of whitespace-token bigram sets. Two texts without any
/// bigram are identical (1.0); exactly one without bigrams gives 0.0.
double shingle_similarity(std::string_view a, std::string_view b);

/// Index of the first minimal row sum. Throws Error(EmptyMatrix) for no rows
/// or no columns and Error(InvalidParams) for ragged rows or entries outside
/// [0, 1].
std::size_t brute_force_mbr_oracle(const std::vector<std::vector<double>>& losses);

/// Throws Error(MissingLogprobs) when a hypothesis has none.
SelectionOutcome select_likelihood(const SamplePool& pool, const SelectionOptions& options = {});

SelectionOutcome select_sim_mbr(const SamplePool& pool, RiskTable* table = nullptr);

SelectionOutcome select_reward_bon(RewardBackend& reward, const PromptRecord& prompt, const SamplePool& pool,
                                   const SelectionOptions& options = {});

SelectionOutcome select_judge_mbr(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                                  const SelectionOptions& options = {}, RiskTable* table = nullptr);

/// In ordered mode the hypothesis is also compared with itself, so the call
/// count is N * (N + M).
SelectionOutcome select_xmbr(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                             const SelectionOptions& options = {}, RiskTable* table = nullptr);

/// One one-pass judge call over all hypotheses (two with a separate
/// checklist call). A singleton pool returns index 0 without calling.
SelectionOutcome select_chops(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                              const SelectionOptions& options = {});

struct SelectionBackends {
  JudgeBackend* judge = nullptr;
  RewardBackend* reward = nullptr;
};

/// Dispatches on `strategy`. Throws Error(InvalidConfig) when the strategy
/// needs a backend that is not provided.
SelectionOutcome select(Strategy strategy, const SelectionBackends& backends, const PromptRecord& prompt,
                        const SamplePool& pool, const SelectionOptions& options = {});

}  // namespace polysel
