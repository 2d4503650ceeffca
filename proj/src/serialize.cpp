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

#include "polysel/serialize.hpp"

namespace polysel {

void to_json(nlohmann::json& j, const PromptRecord& r) {
  j = {{"id", r.id}, {"language", r.language}, {"task", to_string(r.task)}, {"prompt", r.text}};
  if (r.reference) j["reference"] = *r.reference;
  if (r.answer) j["answer"] = *r.answer;
}

void from_json(const nlohmann::json& j, PromptRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.language = j.at("language").get<LanguageTag>();
  r.task = parse_task_kind(j.at("task").get<std::string>());
  r.text = j.at("prompt").get<std::string>();
  r.reference = j.contains("reference") && !j["reference"].is_null()
                    ? std::optional(j["reference"].get<std::string>())
                    : std::nullopt;
  // Gold answers are sometimes stored as numbers.
  if (j.contains("answer") && !j["answer"].is_null()) {
    const auto& a = j["answer"];
    r.answer = a.is_string() ? a.get<std::string>() : a.dump();
  } else {
    r.answer.reset();
  }
}

void to_json(nlohmann::json& j, const DecodeParams& p) {
  j = {{"temperature", p.temperature}, {"min_p", p.min_p}, {"max_tokens", p.max_tokens}};
  j["seed"] = p.seed ? nlohmann::json(*p.seed) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, DecodeParams& p) {
  p.temperature = j.at("temperature").get<double>();
  p.min_p = j.value("min_p", 0.0);
  p.max_tokens = j.value("max_tokens", 512);
  p.seed = j.contains("seed") && !j["seed"].is_null() ? std::optional(j["seed"].get<std::uint64_t>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const Sample& s) {
  j = {{"text", s.text},
       {"params", s.params},
       {"language", s.language},
       {"provenance", to_string(s.provenance)}};
  j["token_logprobs"] = s.token_logprobs ? nlohmann::json(*s.token_logprobs) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, Sample& s) {
  s.text = j.at("text").get<std::string>();
  s.params = j.at("params").get<DecodeParams>();
  s.language = j.at("language").get<LanguageTag>();
  s.provenance = parse_provenance(j.at("provenance").get<std::string>());
  s.token_logprobs = j.contains("token_logprobs") && !j["token_logprobs"].is_null()
                         ? std::optional(j["token_logprobs"].get<std::vector<double>>())
                         : std::nullopt;
}

void to_json(nlohmann::json& j, const SamplePool& p) {
  j = {{"prompt_id", p.prompt_id},
       {"target_language", p.target_language},
       {"hypotheses", p.hypotheses},
       {"cross_lingual_evidence", p.cross_lingual_evidence}};
  j["in_language_evidence"] =
      p.in_language_evidence ? nlohmann::json(*p.in_language_evidence) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SamplePool& p) {
  p.prompt_id = j.at("prompt_id").get<std::string>();
  p.target_language = j.at("target_language").get<LanguageTag>();
  p.hypotheses = j.at("hypotheses").get<std::vector<Sample>>();
  p.cross_lingual_evidence = j.value("cross_lingual_evidence", std::vector<Sample>{});
  p.in_language_evidence = j.contains("in_language_evidence") && !j["in_language_evidence"].is_null()
                               ? std::optional(j["in_language_evidence"].get<std::vector<std::size_t>>())
                               : std::nullopt;
}

void to_json(nlohmann::json& j, const CallLedger& l) {
  j = {{"generation_calls", l.generation_calls},
       {"judge_pairwise_calls", l.judge_pairwise_calls},
       {"judge_onepass_calls", l.judge_onepass_calls},
       {"reward_calls", l.reward_calls},
       {"cached_hits", l.cached_hits}};
}

void from_json(const nlohmann::json& j, CallLedger& l) {
  l.generation_calls = j.value("generation_calls", std::uint64_t{0});
  l.judge_pairwise_calls = j.value("judge_pairwise_calls", std::uint64_t{0});
  l.judge_onepass_calls = j.value("judge_onepass_calls", std::uint64_t{0});
  l.reward_calls = j.value("reward_calls", std::uint64_t{0});
  l.cached_hits = j.value("cached_hits", std::uint64_t{0});
}

void to_json(nlohmann::json& j, const SelectionOutcome& o) {
  j = {{"strategy", to_string(o.strategy)},
       {"chosen_index", o.chosen_index},
       {"scores", o.per_candidate_score},
       {"ledger", o.ledger}};
  j["rationale"] = o.rationale ? nlohmann::json(*o.rationale) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SelectionOutcome& o) {
  o.strategy = parse_strategy(j.at("strategy").get<std::string>());
  o.chosen_index = j.at("chosen_index").get<std::size_t>();
  o.per_candidate_score = j.at("scores").get<std::vector<double>>();
  o.ledger = j.value("ledger", CallLedger{});
  o.rationale = j.contains("rationale") && !j["rationale"].is_null() ? std::optional(j["rationale"].get<std::string>())
                                                                     : std::nullopt;
}

void to_json(nlohmann::json& j, const Preference& p) {
  j = {{"verdict", to_string(p.verdict)}, {"raw_text", p.raw_text}};
}

void from_json(const nlohmann::json& j, Preference& p) {
  p.verdict = parse_verdict_name(j.at("verdict").get<std::string>());
  p.raw_text = j.value("raw_text", std::string{});
}

void to_json(nlohmann::json& j, const BackendDescriptor& d) {
  j = {{"id", d.id},
       {"kind", to_string(d.kind)},
       {"max_concurrency", d.max_concurrency},
       {"timeout_ms", d.timeout.count()},
       {"retry_limit", d.retry_limit},
       {"options", d.options}};
  if (d.endpoint) j["endpoint"] = *d.endpoint;
  if (d.model_name) j["model"] = *d.model_name;
  if (d.auth_env_var) j["auth_env_var"] = *d.auth_env_var;
}

void from_json(const nlohmann::json& j, BackendDescriptor& d) {
  auto optional_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<std::string>();
  };
  d.id = j.at("id").get<std::string>();
  d.kind = parse_backend_kind(j.at("kind").get<std::string>());
  d.endpoint = optional_string("endpoint");
  d.model_name = optional_string("model");
  d.auth_env_var = optional_string("auth_env_var");
  d.max_concurrency = j.value("max_concurrency", 4);
  d.timeout = std::chrono::milliseconds(j.value("timeout_ms", std::int64_t{60'000}));
  d.retry_limit = j.value("retry_limit", 2);
  d.options = j.value("options", nlohmann::json::object());
  d.validate();
}

}  // namespace polysel
