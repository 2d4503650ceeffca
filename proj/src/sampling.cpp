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

#include "polysel/sampling.hpp"

#include <algorithm>
#include <exception>
#include <optional>

#include "polysel/serialize.hpp"
#include "polysel/util.hpp"

namespace polysel {
namespace {

constexpr std::uint64_t kEvidenceStream = 0x65766964656e6365ULL;  // "evidence"

struct SlotResult {
  std::optional<Sample> sample;
  std::exception_ptr error;
  CallLedger ledger;
};

// Runs one single-sample generate per params entry and folds the results.
std::vector<Sample> run_slots(GenerationBackend& backend, const PromptRecord& prompt,
                              const std::vector<DecodeParams>& params,
                              const std::vector<std::optional<LanguageTag>>& respond_in, CallLedger& ledger,
                              std::size_t parallelism, std::string_view what) {
  std::vector<SlotResult> results(params.size());
  parallel_for(params.size(), parallelism, [&](std::size_t i) {
    try {
      auto out = backend.generate(prompt, params[i], 1, respond_in[i], results[i].ledger);
      if (out.size() != 1) throw Error(ErrorCode::MalformedResponse, "backend returned a wrong sample count");
      results[i].sample = std::move(out.front());
    } catch (...) {
      results[i].error = std::current_exception();
    }
  });

  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    ledger += results[i].ledger;
    if (results[i].error) failed.push_back(i);
  }
  if (!failed.empty()) {
    if (failed.size() == results.size()) std::rethrow_exception(results[failed.front()].error);
    std::string detail;
    try {
      std::rethrow_exception(results[failed.front()].error);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
      detail = "unknown error";
    }
    std::string indices;
    for (auto i : failed) indices += (indices.empty() ? "" : ",") + std::to_string(i);
    throw Error(ErrorCode::PartialPool,
                prompt.id + ": " + std::string(what) + " slots [" + indices + "] failed; first error: " + detail);
  }

  std::vector<Sample> samples;
  samples.reserve(results.size());
  for (auto& r : results) samples.push_back(std::move(*r.sample));
  return samples;
}

}  // namespace

std::string_view to_string(SamplingStrategy s) {
  switch (s) {
    case SamplingStrategy::SingleTemp: return "single_temp";
    case SamplingStrategy::MultiTemp: return "multi_temp";
    case SamplingStrategy::HedgedSingleTemp: return "hedged_single_temp";
    case SamplingStrategy::HedgedMultiTemp: return "hedged_multi_temp";
  }
  return "single_temp";
}

SamplingStrategy parse_sampling_strategy(std::string_view name) {
  for (auto s : {SamplingStrategy::SingleTemp, SamplingStrategy::MultiTemp, SamplingStrategy::HedgedSingleTemp,
                 SamplingStrategy::HedgedMultiTemp}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown sampling strategy '" + std::string(name) + "'");
}

LanguageTag EvidenceLanguageRule::resolve(const LanguageTag& target, std::uint64_t draw) const {
  switch (kind) {
    case Kind::Default:
      return target.is_english() ? LanguageTag("zh") : LanguageTag("en");
    case Kind::Fixed:
      if (languages.size() != 1) throw Error(ErrorCode::InvalidConfig, "fixed evidence rule needs one language");
      return languages.front();
    case Kind::RandomFromSet: {
      std::vector<LanguageTag> options;
      for (const auto& l : languages) {
        if (l != target) options.push_back(l);
      }
      if (options.empty()) options = languages;
      if (options.empty()) throw Error(ErrorCode::InvalidConfig, "random evidence rule needs languages");
      DeterministicRng rng(draw);
      return options[rng.below(options.size())];
    }
  }
  return LanguageTag("en");
}

void SamplingPlan::validate() const {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "pool size must be at least 1");
  if (hedged() && n < 2) throw Error(ErrorCode::InvalidConfig, "hedged plans need n >= 2");
  if (evidence_m < 0) throw Error(ErrorCode::InvalidConfig, "evidence_m must be non-negative");
  if (multi_temperature()) {
    if (temperature_menu.empty()) throw Error(ErrorCode::InvalidConfig, "temperature_menu is empty");
    for (double t : temperature_menu) DecodeParams{t, min_p, max_tokens, seed}.validate();
  }
  DecodeParams{temperature, min_p, max_tokens, seed}.validate();
  if (evidence_rule.kind == EvidenceLanguageRule::Kind::Fixed && evidence_rule.languages.size() != 1) {
    throw Error(ErrorCode::InvalidConfig, "fixed evidence rule needs exactly one language");
  }
  if (evidence_rule.kind == EvidenceLanguageRule::Kind::RandomFromSet && evidence_rule.languages.empty()) {
    throw Error(ErrorCode::InvalidConfig, "random evidence rule needs at least one language");
  }
}

SamplingPlan SamplingPlan::resized(int new_n) const {
  SamplingPlan out = *this;
  out.n = new_n;
  return out;
}

DecodeParams SamplingPlan::evidence_params(std::size_t j) const {
  return {temperature, min_p, max_tokens, mix64(mix64(seed, kEvidenceStream), j)};
}

SamplingPlan build_plan(const nlohmann::json& config) {
  if (!config.is_null() && !config.is_object()) throw Error(ErrorCode::InvalidConfig, "sampling config must be an object");
  SamplingPlan plan;
  const nlohmann::json c = config.is_null() ? nlohmann::json::object() : config;
  try {
    if (c.contains("strategy")) plan.strategy = parse_sampling_strategy(c["strategy"].get<std::string>());
    plan.n = c.value("n", plan.n);
    plan.temperature = c.value("temperature", plan.temperature);
    plan.temperature_menu = c.value("temperature_menu", plan.temperature_menu);
    plan.min_p = c.value("min_p", plan.min_p);
    plan.max_tokens = c.value("max_tokens", plan.max_tokens);
    plan.seed = c.value("seed", plan.seed);
    plan.evidence_m = c.value("evidence_m", plan.evidence_m);
    if (c.contains("evidence_language")) {
      const auto& rule = c["evidence_language"];
      if (rule.is_array()) {
        plan.evidence_rule = EvidenceLanguageRule::random_from(rule.get<std::vector<LanguageTag>>());
      } else if (rule.get<std::string>() == "default") {
        plan.evidence_rule = EvidenceLanguageRule::default_rule();
      } else {
        plan.evidence_rule = EvidenceLanguageRule::fixed(rule.get<LanguageTag>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("sampling config: ") + e.what());
  }
  plan.validate();
  return plan;
}

nlohmann::json plan_to_json(const SamplingPlan& plan) {
  nlohmann::json j = {{"strategy", to_string(plan.strategy)},
                      {"n", plan.n},
                      {"temperature", plan.temperature},
                      {"temperature_menu", plan.temperature_menu},
                      {"min_p", plan.min_p},
                      {"max_tokens", plan.max_tokens},
                      {"seed", plan.seed},
                      {"evidence_m", plan.evidence_m}};
  switch (plan.evidence_rule.kind) {
    case EvidenceLanguageRule::Kind::Default: j["evidence_language"] = "default"; break;
    case EvidenceLanguageRule::Kind::Fixed: j["evidence_language"] = plan.evidence_rule.languages.front(); break;
    case EvidenceLanguageRule::Kind::RandomFromSet: j["evidence_language"] = plan.evidence_rule.languages; break;
  }
  return j;
}

std::vector<DecodeParams> materialize_slots(const SamplingPlan& plan) {
  std::vector<DecodeParams> slots;
  slots.reserve(static_cast<std::size_t>(std::max(plan.n, 0)));
  for (int i = 0; i < plan.n; ++i) {
    auto index = static_cast<std::uint64_t>(i);
    if (plan.hedged() && i == 0) {
      // Unseeded so the greedy output is shared across seeds and pool sizes.
      slots.push_back(DecodeParams{0.0, 0.0, plan.max_tokens, std::nullopt});
      continue;
    }
    double t = plan.temperature;
    if (plan.multi_temperature()) {
      DeterministicRng rng(mix64(plan.seed, index));
      t = plan.temperature_menu[rng.below(plan.temperature_menu.size())];
    }
    slots.push_back(DecodeParams{t, plan.min_p, plan.max_tokens, plan.seed + index});
  }
  return slots;
}

SamplePool assemble_pool(GenerationBackend& backend, const PromptRecord& prompt, const SamplingPlan& plan,
                         CallLedger& ledger, std::size_t parallelism) {
  if (plan.n < 1) throw Error(ErrorCode::InvalidConfig, "pool size must be at least 1");
  auto slots = materialize_slots(plan);
  std::vector<std::optional<LanguageTag>> respond_in(slots.size());
  auto samples = run_slots(backend, prompt, slots, respond_in, ledger, parallelism, "hypothesis");

  SamplePool pool;
  pool.prompt_id = prompt.id;
  pool.target_language = prompt.language;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Sample& s = samples[i];
    // Only the hedge slot counts as the greedy hypothesis; a menu draw of
    // zero is an ordinary sample.
    s.provenance = plan.hedged() && i == 0 ? Provenance::Greedy : Provenance::Stochastic;
  }
  pool.hypotheses = std::move(samples);
  pool.validate();
  return pool;
}

SamplePool extend_evidence(GenerationBackend& backend, const PromptRecord& prompt, const SamplePool& pool,
                           const SamplingPlan& plan, CallLedger& ledger, std::size_t parallelism) {
  if (plan.evidence_m < 1) throw Error(ErrorCode::InvalidConfig, "evidence_m must be at least 1 to extend evidence");
  auto m = static_cast<std::size_t>(plan.evidence_m);
  std::uint64_t prompt_stream = mix64(mix64(plan.seed, kEvidenceStream), digest64(prompt.text));

  std::vector<DecodeParams> params;
  std::vector<std::optional<LanguageTag>> respond_in;
  for (std::size_t j = 0; j < m; ++j) {
    params.push_back(plan.evidence_params(j));
    LanguageTag language = plan.evidence_rule.resolve(pool.target_language, mix64(prompt_stream, j));
    respond_in.push_back(language == prompt.language ? std::nullopt : std::optional(language));
  }
  auto samples = run_slots(backend, prompt, params, respond_in, ledger, parallelism, "evidence");

  SamplePool out = pool;
  for (std::size_t j = 0; j < m; ++j) {
    Sample& s = samples[j];
    s.language = respond_in[j].value_or(prompt.language);
    s.provenance = s.language != pool.target_language ? Provenance::CrossLingualEvidence : Provenance::Stochastic;
    out.cross_lingual_evidence.push_back(std::move(s));
  }
  out.validate();
  return out;
}

}  // namespace polysel
