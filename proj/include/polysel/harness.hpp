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

// Configuration, dataset ingestion, end-to-end runs and reports.
//
// A run writes into <output_dir>/<run_id>/:
//   results.jsonl  one line per completed prompt
//   pools.jsonl    the sampled pool of every prompt
//   ledger.json    per-prompt status and call counts (rewritten atomically)
//   report.csv, report.md, report.json, metrics.jsonl

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"
#include "polysel/metrics.hpp"
#include "polysel/sampling.hpp"
#include "polysel/selection.hpp"

namespace polysel {

struct BaselineConfig {
  BaselineKind kind = BaselineKind::GreedySelf;
  std::filesystem::path path;  // ExternalModel: JSONL of {id, text}
};

struct RunConfig {
  std::filesystem::path dataset_path;
  /// Roles: generator (required), judge, reward, eval_judge (defaults to judge).
  std::map<std::string, BackendDescriptor> backends;
  /// Scorer spec, or a map from task name (or "default") to a spec. Tasks
  /// without one use exact_match for math, then the reward role, then the
  /// synthetic oracle when the generator is synthetic.
  nlohmann::json scorer;
  SamplingPlan plan;
  std::vector<Strategy> strategies;
  SelectionOptions selection;
  BaselineConfig baseline;
  int concurrency = 4;  // global in-flight cap, also the number of prompts in progress
  std::filesystem::path cache_dir;  // empty keeps the cache in memory
  std::filesystem::path output_dir{"runs"};
  std::filesystem::path templates_dir;  // empty uses built-in templates
  std::uint64_t seed = 0;
  std::string run_id{"run"};

  std::filesystem::path run_dir() const { return output_dir / run_id; }
  /// Throws Error(ConfigError) when a strategy lacks its backend role.
  void validate() const;
};

/// Parses a JSON config. Relative paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Throws Error(ParseError) / Error(DuplicateId) naming the 1-based line,
/// or Error(ValidationError) naming the record id.
std::vector<PromptRecord> load_dataset(const std::filesystem::path& path);

enum class PromptStatus { Pending, Sampled, Selected, Scored, Failed };

std::string_view to_string(PromptStatus s);
PromptStatus parse_prompt_status(std::string_view name);

struct PromptState {
  PromptStatus status = PromptStatus::Pending;
  std::string reason;
  CallLedger ledger;
  std::string updated;
};

class RunLedger {
 public:
  /// Moves `id` forward. Throws Error(InvalidParams) on a backwards move or
  /// any move out of Failed.
  void advance(const std::string& id, PromptStatus status, const CallLedger& ledger = {});
  void fail(const std::string& id, const std::string& reason, const CallLedger& ledger = {});

  const PromptState& state(const std::string& id) const;
  bool contains(const std::string& id) const { return prompts_.count(id) > 0; }
  /// Sum of every prompt's ledger.
  CallLedger total() const;
  const std::map<std::string, PromptState>& prompts() const { return prompts_; }

  nlohmann::json to_json() const;
  static RunLedger from_json(const nlohmann::json& j);
  static RunLedger load(const std::filesystem::path& path);
  /// Writes through a temporary file and rename.
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, PromptState> prompts_;
};

struct RunSummary {
  QualityReport report;
  RunLedger ledger;
  std::size_t completed = 0;
  std::size_t skipped = 0;  // already completed by an earlier attempt
  std::size_t failed = 0;
};

/// Runs every prompt, resuming from an existing run directory.
RunSummary run(const RunConfig& config);

/// Samples pools only and writes pools.jsonl.
std::vector<SamplePool> sample_pools(const RunConfig& config);

/// Reads pools.jsonl from `dir`.
std::vector<std::pair<PromptRecord, SamplePool>> load_pools(const std::filesystem::path& dir);

/// Applies one strategy to stored pools. Backends come from `config` when
/// given. Returns one result record per pool.
std::vector<nlohmann::json> select_pools(const std::filesystem::path& dir, Strategy strategy,
                                         const std::optional<RunConfig>& config);

/// Metric records stored in a run's results.jsonl.
std::vector<MetricRecord> load_metric_records(const std::filesystem::path& run_dir);

std::string render_csv(const QualityReport& report);
std::string render_markdown(const QualityReport& report);

/// Writes report.csv, report.md, report.json and metrics.jsonl into `dir`.
void emit_report(const QualityReport& report, const std::vector<MetricRecord>& raw, const std::filesystem::path& dir);

struct ScalingRow {
  int n = 0;
  std::string strategy;
  std::string metric;
  double value = 0.0;
  std::size_t prompts = 0;
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  /// Pools per size, in dataset order; failed prompts are left out.
  std::map<int, std::vector<SamplePool>> pools;
  std::vector<std::string> failures;
};

/// Builds pools of every size in ascending `sizes` (sharing slots through
/// the cache), applies the configured strategies and reports, per size,
/// the mean chosen score, its delta against greedy and the best-of-pool
/// score. Writes scan.csv into the run directory.
ScalingTable scan_pool_sizes(const RunConfig& config, const std::vector<int>& sizes);

std::string render_scaling_csv(const ScalingTable& table);

}  // namespace polysel
