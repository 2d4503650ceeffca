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

// JSON representations of the core types. PromptRecord uses the dataset
// line shape {id, language, task, prompt, reference?, answer?}.

#pragma once

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"
#include "polysel/core.hpp"

namespace nlohmann {

template <>
struct adl_serializer<polysel::LanguageTag> {
  static polysel::LanguageTag from_json(const json& j) { return polysel::LanguageTag(j.get<std::string>()); }
  static void to_json(json& j, const polysel::LanguageTag& t) { j = t.code(); }
};

}  // namespace nlohmann

namespace polysel {

void to_json(nlohmann::json& j, const PromptRecord& r);
void from_json(const nlohmann::json& j, PromptRecord& r);

void to_json(nlohmann::json& j, const DecodeParams& p);
void from_json(const nlohmann::json& j, DecodeParams& p);

void to_json(nlohmann::json& j, const Sample& s);
void from_json(const nlohmann::json& j, Sample& s);

void to_json(nlohmann::json& j, const SamplePool& p);
void from_json(const nlohmann::json& j, SamplePool& p);

void to_json(nlohmann::json& j, const CallLedger& l);
void from_json(const nlohmann::json& j, CallLedger& l);

void to_json(nlohmann::json& j, const SelectionOutcome& o);
void from_json(const nlohmann::json& j, SelectionOutcome& o);

void to_json(nlohmann::json& j, const Preference& p);
void from_json(const nlohmann::json& j, Preference& p);

/// Descriptor shape: {id, kind, endpoint?, model?, auth_env_var?,
/// max_concurrency?, timeout_ms?, retry_limit?, options?}. Validates.
void to_json(nlohmann::json& j, const BackendDescriptor& d);
void from_json(const nlohmann::json& j, BackendDescriptor& d);

}  // namespace polysel
