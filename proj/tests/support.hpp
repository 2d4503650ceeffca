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

// Helpers shared by the unit and acceptance tests.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"
#include "polysel/templates.hpp"

namespace polysel::testing {

inline PromptRecord open_prompt(std::string id = "p1", std::string language = "en",
                                std::string text = "Write a short poem about rain.") {
  PromptRecord p;
  p.id = std::move(id);
  p.language = LanguageTag(std::move(language));
  p.task = TaskKind::OpenEnded;
  p.text = std::move(text);
  return p;
}

inline Sample sample(std::string text, std::string language = "en", Provenance provenance = Provenance::Stochastic) {
  Sample s;
  s.text = std::move(text);
  s.language = LanguageTag(std::move(language));
  s.provenance = provenance;
  s.params = DecodeParams{provenance == Provenance::Greedy ? 0.0 : 0.7, 0.0, 64, std::nullopt};
  return s;
}

/// Pool whose hypotheses are `texts`; evidence samples are stamped with
/// `evidence_language` and CLE provenance.
inline SamplePool make_pool(const std::vector<std::string>& texts, const std::vector<std::string>& evidence = {},
                            std::string language = "en", std::string evidence_language = "zh") {
  SamplePool pool;
  pool.prompt_id = "p1";
  pool.target_language = LanguageTag(language);
  for (const auto& t : texts) pool.hypotheses.push_back(sample(t, language));
  for (const auto& t : evidence) {
    pool.cross_lingual_evidence.push_back(sample(t, evidence_language, Provenance::CrossLingualEvidence));
  }
  return pool;
}

/// Judge answering from a fixed table keyed by (candidate text, reference
/// text). A missing key falls back to the mirrored reverse entry, then Tie.
/// Every answered call is appended to the transcript.
class TableJudge final : public JudgeBackend {
 public:
  using Key = std::pair<std::string, std::string>;

  explicit TableJudge(std::map<Key, Verdict> table = {}, std::size_t one_pass_choice = 0)
      : table_(std::move(table)), one_pass_choice_(one_pass_choice) {}

  const std::string& id() const override { return id_; }
  std::string template_version(PairKind) const override { return "table"; }
  std::string template_version(ChecklistMode) const override { return "table"; }

  Preference pairwise(const PromptRecord&, const Sample& a, const Sample& b, PairKind kind,
                      CallLedger& ledger) override {
    ++ledger.judge_pairwise_calls;
    Verdict v = Verdict::Tie;
    if (auto it = table_.find({a.text, b.text}); it != table_.end()) {
      v = it->second;
    } else if (auto rev = table_.find({b.text, a.text}); rev != table_.end()) {
      v = mirror(rev->second);
    }
    std::lock_guard lock(mutex_);
    transcript_.push_back({a.text, b.text, kind, v});
    return Preference{v, std::string(to_string(v))};
  }

  OnePassVerdict one_pass(const PromptRecord&, std::span<const Sample> candidates, ChecklistMode mode,
                          CallLedger& ledger) override {
    ledger.judge_onepass_calls += mode == ChecklistMode::SeparateCall ? 2 : 1;
    return {std::min(one_pass_choice_, candidates.size() - 1), "table choice"};
  }

  struct Call {
    std::string candidate;
    std::string reference;
    PairKind kind;
    Verdict verdict;
  };
  const std::vector<Call>& transcript() const { return transcript_; }

 private:
  std::string id_{"table-judge"};
  std::map<Key, Verdict> table_;
  std::size_t one_pass_choice_;
  std::mutex mutex_;
  std::vector<Call> transcript_;
};

/// Reward returning a fixed score per text (0 for unknown texts).
class TableReward final : public RewardBackend {
 public:
  explicit TableReward(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
  const std::string& id() const override { return id_; }
  double score(const PromptRecord&, const Sample& s, CallLedger& ledger) override {
    ++ledger.reward_calls;
    auto it = scores_.find(s.text);
    return it == scores_.end() ? 0.0 : it->second;
  }

 private:
  std::string id_{"table-reward"};
  std::map<std::string, double> scores_;
};

inline BackendDescriptor descriptor(std::string id, BackendKind kind, nlohmann::json options = nlohmann::json::object()) {
  BackendDescriptor d;
  d.id = std::move(id);
  d.kind = kind;
  d.options = std::move(options);
  return d;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("polysel-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace polysel::testing
