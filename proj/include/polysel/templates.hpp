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

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace polysel {

/// Prompt templates used by LLM judges and the cross-lingual instruction.
///
/// Placeholders are written as {name}. Recognized slots: {prompt},
/// {candidates}, {candidate_a}, {candidate_b}, {checklist}, {language}.
/// Instructions are always in English regardless of the prompt language.
struct JudgeTemplates {
  std::string pairwise;
  std::string pairwise_cross_lingual;
  std::string chops;           // checklist + selection in one call
  std::string one_pass;        // selection without a checklist
  std::string checklist;       // first call of the two-call variant
  std::string chops_given_checklist;
  std::string reask_pairwise;  // appended when a verdict cannot be parsed
  std::string reask_one_pass;
  std::string respond_in;      // cross-lingual generation instruction

  static JudgeTemplates defaults();
  /// Loads `<name>.txt` files from `dir`; missing files keep the default.
  static JudgeTemplates load(const std::filesystem::path& dir);
  /// Writes every template as `<name>.txt` into `dir`.
  void save(const std::filesystem::path& dir) const;

  /// Short digest of a single template's text; enters cache keys.
  static std::string version_of(std::string_view text);
};

/// Replaces {key} placeholders. Unknown placeholders are left untouched and
/// values are inserted verbatim (no recursive expansion).
std::string fill_template(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace polysel
