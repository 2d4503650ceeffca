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

#include "polysel/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <utility>

namespace polysel {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPrompt: return "EmptyPrompt";
    case ErrorCode::MissingAnswer: return "MissingAnswer";
    case ErrorCode::MissingReference: return "MissingReference";
    case ErrorCode::UnexpectedGold: return "UnexpectedGold";
    case ErrorCode::InvalidLanguage: return "InvalidLanguage";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
    case ErrorCode::BackendTimeout: return "BackendTimeout";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonFiniteLogits: return "NonFiniteLogits";
    case ErrorCode::CacheCorrupt: return "CacheCorrupt";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::PartialPool: return "PartialPool";
    case ErrorCode::EmptyEvidence: return "EmptyEvidence";
    case ErrorCode::MissingLogprobs: return "MissingLogprobs";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::ZeroGreedyScore: return "ZeroGreedyScore";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

LanguageTag::LanguageTag(std::string code) : code_(std::move(code)) {
  if (code_.empty()) throw Error(ErrorCode::InvalidLanguage, "empty language code");
  for (char c : code_) {
    bool ok = c >= 'a' && c <= 'z';
    if (!ok) throw Error(ErrorCode::InvalidLanguage, "language code must be ASCII lowercase: '" + code_ + "'");
  }
}

std::string LanguageTag::display_name() const {
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 16> kNames{{
      {"ar", "Arabic"},   {"de", "German"},   {"en", "English"},    {"es", "Spanish"},
      {"fr", "French"},   {"hi", "Hindi"},    {"it", "Italian"},    {"ja", "Japanese"},
      {"ko", "Korean"},   {"nl", "Dutch"},    {"pl", "Polish"},     {"pt", "Portuguese"},
      {"ru", "Russian"},  {"tr", "Turkish"},  {"vi", "Vietnamese"}, {"zh", "Chinese"},
  }};
  for (const auto& [code, name] : kNames) {
    if (code == code_) return std::string(name);
  }
  return code_;
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::OpenEnded: return "open_ended";
    case TaskKind::MathReasoning: return "math";
    case TaskKind::MachineTranslation: return "translation";
  }
  return "open_ended";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "open_ended" || name == "arena") return TaskKind::OpenEnded;
  if (name == "math" || name == "mgsm") return TaskKind::MathReasoning;
  if (name == "translation" || name == "wmt") return TaskKind::MachineTranslation;
  throw Error(ErrorCode::ParseError, "unknown task kind '" + std::string(name) + "'");
}

void validate_prompt_record(const PromptRecord& record) {
  auto blank = [](const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  };
  if (blank(record.text)) throw Error(ErrorCode::EmptyPrompt, "prompt '" + record.id + "' has no text");
  switch (record.task) {
    case TaskKind::MathReasoning:
      if (!record.answer || blank(*record.answer)) {
        throw Error(ErrorCode::MissingAnswer, "math prompt '" + record.id + "' has no gold answer");
      }
      if (record.reference) throw Error(ErrorCode::UnexpectedGold, "math prompt '" + record.id + "' has a reference");
      break;
    case TaskKind::MachineTranslation:
      if (!record.reference || blank(*record.reference)) {
        throw Error(ErrorCode::MissingReference, "translation prompt '" + record.id + "' has no reference");
      }
      if (record.answer) throw Error(ErrorCode::UnexpectedGold, "translation prompt '" + record.id + "' has an answer");
      break;
    case TaskKind::OpenEnded:
      if (record.answer || record.reference) {
        throw Error(ErrorCode::UnexpectedGold, "open-ended prompt '" + record.id + "' carries gold data");
      }
      break;
  }
}

void DecodeParams::validate() const {
  if (!std::isfinite(temperature) || temperature < 0.0 || temperature > kMaxTemperature) {
    throw Error(ErrorCode::InvalidParams, "temperature must lie in [0, 2]");
  }
  if (!std::isfinite(min_p) || min_p < 0.0 || min_p > 1.0) {
    throw Error(ErrorCode::InvalidParams, "min_p must lie in [0, 1]");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidParams, "max_tokens must be positive");
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Greedy: return "greedy";
    case Provenance::Stochastic: return "stochastic";
    case Provenance::CrossLingualEvidence: return "cross_lingual_evidence";
  }
  return "stochastic";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "greedy") return Provenance::Greedy;
  if (name == "stochastic") return Provenance::Stochastic;
  if (name == "cross_lingual_evidence") return Provenance::CrossLingualEvidence;
  throw Error(ErrorCode::ParseError, "unknown provenance '" + std::string(name) + "'");
}

std::vector<std::size_t> SamplePool::evidence_indices() const {
  if (in_language_evidence) return *in_language_evidence;
  std::vector<std::size_t> all(hypotheses.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

std::optional<std::size_t> SamplePool::greedy_index() const {
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (hypotheses[i].provenance == Provenance::Greedy) return i;
  }
  return std::nullopt;
}

void SamplePool::validate() const {
  if (hypotheses.empty()) throw Error(ErrorCode::InvalidConfig, "pool '" + prompt_id + "' has no hypotheses");
  int greedy = 0;
  for (const auto& h : hypotheses) {
    if (h.language != target_language) {
      throw Error(ErrorCode::InvalidConfig, "pool '" + prompt_id + "' mixes hypothesis languages");
    }
    if (h.provenance == Provenance::CrossLingualEvidence) {
      throw Error(ErrorCode::InvalidConfig, "cross-lingual evidence cannot be a hypothesis");
    }
    if (h.provenance == Provenance::Greedy) {
      ++greedy;
      if (!h.params.greedy()) throw Error(ErrorCode::InvalidConfig, "greedy sample with non-zero temperature");
    }
  }
  if (greedy > 1) throw Error(ErrorCode::InvalidConfig, "pool '" + prompt_id + "' has more than one greedy hypothesis");
  if (in_language_evidence) {
    for (std::size_t idx : *in_language_evidence) {
      if (idx >= hypotheses.size()) throw Error(ErrorCode::InvalidConfig, "evidence index out of range");
    }
  }
  for (const auto& e : cross_lingual_evidence) {
    if (e.provenance == Provenance::CrossLingualEvidence && e.language == target_language) {
      throw Error(ErrorCode::InvalidConfig, "cross-lingual evidence in the target language");
    }
  }
}

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::Likelihood: return "likelihood";
    case Strategy::SimMBR: return "sim_mbr";
    case Strategy::RewardBoN: return "reward_bon";
    case Strategy::JudgeMBR: return "judge_mbr";
    case Strategy::XMBR: return "xmbr";
    case Strategy::CHOPS: return "chops";
  }
  return "likelihood";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "likelihood") return Strategy::Likelihood;
  if (name == "sim_mbr") return Strategy::SimMBR;
  if (name == "reward_bon") return Strategy::RewardBoN;
  if (name == "judge_mbr") return Strategy::JudgeMBR;
  if (name == "xmbr") return Strategy::XMBR;
  if (name == "chops") return Strategy::CHOPS;
  throw Error(ErrorCode::ParseError, "unknown strategy '" + std::string(name) + "'");
}

CallLedger& CallLedger::operator+=(const CallLedger& other) noexcept {
  generation_calls += other.generation_calls;
  judge_pairwise_calls += other.judge_pairwise_calls;
  judge_onepass_calls += other.judge_onepass_calls;
  reward_calls += other.reward_calls;
  cached_hits += other.cached_hits;
  return *this;
}

std::size_t first_argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::size_t first_argmin(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

}  // namespace polysel
