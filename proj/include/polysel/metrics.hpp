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

// Quality scoring, pool diagnostics, win rates and report aggregation.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"

namespace polysel {

enum class ScorerKind { RewardBacked, ExactMatch, ReferenceScorerPlugin, SyntheticOracle };

std::string_view to_string(ScorerKind kind);
ScorerKind parse_scorer_kind(std::string_view name);

/// Scores samples for a prompt. Higher is better; results are finite.
class QualityScorer {
 public:
  virtual ~QualityScorer() = default;
  virtual ScorerKind kind() const = 0;
  /// One score per sample, in order.
  virtual std::vector<double> score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                        CallLedger& ledger) = 0;
  double score(const PromptRecord& prompt, const Sample& sample, CallLedger& ledger);
};

class RewardScorer final : public QualityScorer {
 public:
  explicit RewardScorer(std::shared_ptr<RewardBackend> reward) : reward_(std::move(reward)) {}
  ScorerKind kind() const override { return ScorerKind::RewardBacked; }
  std::vector<double> score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                CallLedger& ledger) override;

 private:
  std::shared_ptr<RewardBackend> reward_;
};

/// 1 when the extracted final answer equals the gold answer, else 0.
class ExactMatchScorer final : public QualityScorer {
 public:
  explicit ExactMatchScorer(std::vector<std::string> markers = {});
  ScorerKind kind() const override { return ScorerKind::ExactMatch; }
  std::vector<double> score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                CallLedger& ledger) override;

 private:
  std::vector<std::string> markers_;
};

/// Runs an external program per batch. It reads JSON lines
/// {id, source, hypothesis, reference} on stdin and writes {id, score}
/// lines on stdout.
class PluginScorer final : public QualityScorer {
 public:
  explicit PluginScorer(std::vector<std::string> argv);
  ScorerKind kind() const override { return ScorerKind::ReferenceScorerPlugin; }
  std::vector<double> score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                CallLedger& ledger) override;

 private:
  std::vector<std::string> argv_;
};

/// Reads the hidden quality of synthetic samples.
class SyntheticOracleScorer final : public QualityScorer {
 public:
  ScorerKind kind() const override { return ScorerKind::SyntheticOracle; }
  std::vector<double> score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                CallLedger& ledger) override;
};

/// Builds a scorer from {"kind": ..., "markers": [...], "command": [...]}.
/// RewardBacked scorers use `reward`, which must then be non-null.
std::unique_ptr<QualityScorer> make_scorer(const nlohmann::json& spec, std::shared_ptr<RewardBackend> reward);

struct PoolDiagnostics {
  double greedy_score = 0.0;
  double best_score = 0.0;
  double worst_score = 0.0;
  double hope = 0.0;
  double risk = 0.0;
};

/// Relative changes of the best and worst score against the greedy score,
/// measured in units of |greedy_score|. Throws Error(ZeroGreedyScore).
PoolDiagnostics diagnostics_from_scores(std::span<const double> scores, double greedy_score);

/// Scores every hypothesis once. The greedy sample's score is reused when it
/// is one of the hypotheses.
PoolDiagnostics pool_diagnostics(const PromptRecord& prompt, const SamplePool& pool, QualityScorer& scorer,
                                 const Sample& greedy, CallLedger& ledger);

/// Default markers: "answer is", "answer:", "final answer".
const std::vector<std::string>& default_answer_markers();

/// Number following the last marker occurrence, or else the last number in
/// the text. Currency signs, thousands separators and trailing punctuation
/// are removed. Empty when the text has no number.
std::string extract_final_answer(std::string_view text, std::span<const std::string> markers);
std::string extract_final_answer(std::string_view text);

/// Canonical decimal form ("042.50" -> "42.5", "-0" -> "0"), or the trimmed
/// input when it is not a plain number.
std::string normalize_answer(std::string_view answer);

/// 1 iff both answers normalize to the same string. Throws
/// Error(InvalidParams) for an empty gold answer.
int exact_match(std::string_view candidate, std::string_view gold);

enum class Outcome { Win, Loss, Tie };
enum class BaselineKind { GreedySelf, ExternalModel };

std::string_view to_string(Outcome o);
std::string_view to_string(BaselineKind b);
Outcome outcome_from_verdict(Verdict v);

struct WinRecord {
  std::string prompt_id;
  Outcome outcome = Outcome::Tie;
  BaselineKind baseline = BaselineKind::GreedySelf;
};

/// (wins + ties / 2) / total. Throws Error(EmptyRecords).
double win_rate(std::span<const WinRecord> records);

/// win_rate(strategy) - win_rate(baseline). Both lists must cover the same
/// prompt ids, otherwise Error(InvalidParams).
double win_rate_delta(std::span<const WinRecord> strategy, std::span<const WinRecord> baseline);

/// One observed metric for one prompt. A missing value marks an excluded
/// record (for example a zero greedy score).
struct MetricRecord {
  std::string prompt_id;
  LanguageTag language{"en"};
  TaskKind task = TaskKind::OpenEnded;
  std::string strategy;
  std::string metric;
  std::optional<double> value;
  std::string note;  // exclusion reason
};

/// Metrics reported in percent (value * 100).
bool is_percent_metric(std::string_view metric);

struct ReportCell {
  std::string language;
  TaskKind task = TaskKind::OpenEnded;
  std::string strategy;
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;
};

struct RollupCell {
  bool english = true;
  TaskKind task = TaskKind::OpenEnded;
  std::string strategy;
  std::string metric;
  std::optional<double> value;  // absent when no language contributes
  std::size_t languages = 0;
};

struct QualityReport {
  std::vector<ReportCell> cells;
  std::vector<RollupCell> rollups;
  std::vector<std::string> exclusions;  // "prompt_id: reason"
  std::vector<std::string> failures;    // prompts that failed outright
  std::vector<std::string> notes;
};

/// Groups by (language, task, strategy, metric); means over present values,
/// percent metrics scaled. English roll-up is the English cell; the
/// non-English roll-up is the unweighted mean of the other languages' means.
QualityReport aggregate_report(std::vector<MetricRecord> records);

nlohmann::json report_to_json(const QualityReport& report);
QualityReport report_from_json(const nlohmann::json& j);

}  // namespace polysel
