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

// polysel command line: run, sample, select, report, scan, templates.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polysel/harness.hpp"
#include "polysel/templates.hpp"

namespace {

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw polysel::Error(polysel::ErrorCode::ConfigError, "bad pool size '" + item + "'");
    }
  }
  return out;
}

void print_ledger(const polysel::CallLedger& l) {
  std::cout << "calls: generation=" << l.generation_calls << " judge_pairwise=" << l.judge_pairwise_calls
            << " judge_onepass=" << l.judge_onepass_calls << " reward=" << l.reward_calls
            << " cached_hits=" << l.cached_hits << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample pools, select outputs and report quality across languages."};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Sample, select, score and report (resumes an existing run)");
  run_cmd->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);

  auto* sample_cmd = app.add_subcommand("sample", "Sample pools only");
  sample_cmd->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);

  std::string pools_dir;
  std::string strategy_name;
  auto* select_cmd = app.add_subcommand("select", "Apply one strategy to stored pools; prints JSON lines");
  select_cmd->add_option("--pools", pools_dir, "Directory holding pools.jsonl")->required();
  select_cmd->add_option("--strategy", strategy_name, "likelihood, sim_mbr, reward_bon, judge_mbr, xmbr or chops")
      ->required();
  select_cmd->add_option("--config", config_path, "Configuration providing judge and reward backends");

  std::string run_id;
  std::string format = "md";
  std::string output_dir = "runs";
  auto* report_cmd = app.add_subcommand("report", "Print the report of a finished run");
  report_cmd->add_option("--run", run_id, "Run id")->required();
  report_cmd->add_option("--format", format, "csv or md")->check(CLI::IsMember({"csv", "md"}));
  report_cmd->add_option("--output-dir", output_dir, "Directory containing runs");

  std::string sizes_text;
  auto* scan_cmd = app.add_subcommand("scan", "Evaluate strategies over growing pool sizes");
  scan_cmd->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
  scan_cmd->add_option("--sizes", sizes_text, "Ascending sizes, e.g. 1,3,5,10")->required();

  std::string templates_dir;
  auto* templates_cmd = app.add_subcommand("templates", "Write the built-in judge templates for editing");
  templates_cmd->add_option("dir", templates_dir, "Target directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto config = polysel::load_config(config_path);
      auto summary = polysel::run(config);
      std::cout << "run " << config.run_id << ": " << summary.completed << " completed, " << summary.skipped
                << " already done, " << summary.failed << " failed\n";
      print_ledger(summary.ledger.total());
      std::cout << "report: " << (config.run_dir() / "report.md").string() << '\n';
      for (const auto& f : summary.report.failures) std::cerr << "failed: " << f << '\n';
    } else if (*sample_cmd) {
      auto config = polysel::load_config(config_path);
      auto pools = polysel::sample_pools(config);
      std::cout << pools.size() << " pools written to " << (config.run_dir() / "pools.jsonl").string() << '\n';
    } else if (*select_cmd) {
      std::optional<polysel::RunConfig> config;
      if (!config_path.empty()) config = polysel::load_config(config_path);
      auto strategy = polysel::parse_strategy(strategy_name);
      for (const auto& record : polysel::select_pools(pools_dir, strategy, config)) std::cout << record.dump() << '\n';
    } else if (*report_cmd) {
      std::filesystem::path dir = std::filesystem::path(output_dir) / run_id;
      if (!std::filesystem::exists(dir / "results.jsonl")) {
        throw polysel::Error(polysel::ErrorCode::IoError, "no results for run '" + run_id + "' in " + output_dir);
      }
      auto report = polysel::aggregate_report(polysel::load_metric_records(dir));
      auto ledger = polysel::RunLedger::load(dir / "ledger.json");
      for (const auto& [id, state] : ledger.prompts()) {
        if (state.status == polysel::PromptStatus::Failed) report.failures.push_back(id + ": " + state.reason);
      }
      std::cout << (format == "csv" ? polysel::render_csv(report) : polysel::render_markdown(report));
    } else if (*scan_cmd) {
      auto config = polysel::load_config(config_path);
      auto table = polysel::scan_pool_sizes(config, parse_sizes(sizes_text));
      std::cout << polysel::render_scaling_csv(table);
      for (const auto& f : table.failures) std::cerr << "failed: " << f << '\n';
    } else if (*templates_cmd) {
      polysel::JudgeTemplates::defaults().save(templates_dir);
      std::cout << "templates written to " << templates_dir << '\n';
    }
  } catch (const polysel::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
