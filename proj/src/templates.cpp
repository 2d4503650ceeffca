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

#include "polysel/templates.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <utility>

#include "polysel/error.hpp"
#include "polysel/util.hpp"

namespace polysel {
namespace {

constexpr std::string_view kPairwise = R"(You are an impartial judge. Compare the two responses to the user prompt below and decide which one is better overall. Consider helpfulness, correctness, completeness, and whether the response is written in the language the user expects. Do not let response length or the order of presentation influence you.

[User Prompt]
{prompt}

[Response A]
{candidate_a}

[Response B]
{candidate_b}

Explain your reasoning briefly. Then finish with a final line of exactly one of the forms "Winner: A", "Winner: B" or "Winner: Tie".)";

constexpr std::string_view kPairwiseCrossLingual = R"(You are an impartial judge. Compare the two responses to the user prompt below and decide which one is better in content. The two responses may be written in different languages. Judge the substance of each answer (helpfulness, correctness, completeness) and ignore the language it is written in.

[User Prompt]
{prompt}

[Response A]
{candidate_a}

[Response B]
{candidate_b}

Explain your reasoning briefly. Then finish with a final line of exactly one of the forms "Winner: A", "Winner: B" or "Winner: Tie".)";

constexpr std::string_view kChops = R"(You are an expert evaluator. You will see a user prompt and several candidate responses.

First, write a short checklist of the criteria a high-quality response to this specific prompt must satisfy. Then evaluate every candidate against the checklist. Finally, choose the single best candidate.

[User Prompt]
{prompt}

[Candidates]
{candidates}

Finish with a final line of the form "Best response: <k>", where <k> is the number of the selected candidate.)";

constexpr std::string_view kOnePass = R"(You are an expert evaluator. You will see a user prompt and several candidate responses. Choose the single best candidate.

[User Prompt]
{prompt}

[Candidates]
{candidates}

Finish with a final line of the form "Best response: <k>", where <k> is the number of the selected candidate.)";

constexpr std::string_view kChecklist = R"(You are an expert evaluator. Write a short checklist of the criteria a high-quality response to the user prompt below must satisfy. Output only the checklist.

[User Prompt]
{prompt})";

constexpr std::string_view kChopsGivenChecklist = R"(You are an expert evaluator. Evaluate every candidate response to the user prompt against the checklist, then choose the single best candidate.

[User Prompt]
{prompt}

[Checklist]
{checklist}

[Candidates]
{candidates}

Finish with a final line of the form "Best response: <k>", where <k> is the number of the selected candidate.)";

constexpr std::string_view kReaskPairwise =
    R"(Your previous answer did not end with a verdict. Answer with only one of "Winner: A", "Winner: B" or "Winner: Tie".)";

constexpr std::string_view kReaskOnePass =
    R"(Your previous answer did not name a candidate. Answer with only "Best response: <k>", where <k> is the candidate number.)";

constexpr std::string_view kRespondIn = "Respond in {language}.\n\n{prompt}";

using Member = std::string JudgeTemplates::*;

constexpr std::array<std::pair<std::string_view, Member>, 9> kFields{{
    {"pairwise", &JudgeTemplates::pairwise},
    {"pairwise_cross_lingual", &JudgeTemplates::pairwise_cross_lingual},
    {"chops", &JudgeTemplates::chops},
    {"one_pass", &JudgeTemplates::one_pass},
    {"checklist", &JudgeTemplates::checklist},
    {"chops_given_checklist", &JudgeTemplates::chops_given_checklist},
    {"reask_pairwise", &JudgeTemplates::reask_pairwise},
    {"reask_one_pass", &JudgeTemplates::reask_one_pass},
    {"respond_in", &JudgeTemplates::respond_in},
}};

}  // namespace

JudgeTemplates JudgeTemplates::defaults() {
  JudgeTemplates t;
  t.pairwise = kPairwise;
  t.pairwise_cross_lingual = kPairwiseCrossLingual;
  t.chops = kChops;
  t.one_pass = kOnePass;
  t.checklist = kChecklist;
  t.chops_given_checklist = kChopsGivenChecklist;
  t.reask_pairwise = kReaskPairwise;
  t.reask_one_pass = kReaskOnePass;
  t.respond_in = kRespondIn;
  return t;
}

JudgeTemplates JudgeTemplates::load(const std::filesystem::path& dir) {
  JudgeTemplates t = defaults();
  for (const auto& [name, member] : kFields) {
    auto path = dir / (std::string(name) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read template " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    t.*member = std::move(text);
  }
  return t;
}

void JudgeTemplates::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, member] : kFields) {
    auto path = dir / (std::string(name) + ".txt");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write template " + path.string());
    out << this->*member << '\n';
  }
}

std::string JudgeTemplates::version_of(std::string_view text) { return sha256_hex(text).substr(0, 16); }

std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

}  // namespace polysel
