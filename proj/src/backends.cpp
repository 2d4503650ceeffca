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

#include "polysel/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "polysel/http_backends.hpp"
#include "polysel/mock_backends.hpp"
#include "polysel/synthetic_backends.hpp"

namespace polysel {

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::HttpGeneration: return "http_generation";
    case BackendKind::HttpJudge: return "http_judge";
    case BackendKind::HttpReward: return "http_reward";
    case BackendKind::Mock: return "mock";
    case BackendKind::Synthetic: return "synthetic";
  }
  return "mock";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "http_generation") return BackendKind::HttpGeneration;
  if (name == "http_judge") return BackendKind::HttpJudge;
  if (name == "http_reward") return BackendKind::HttpReward;
  if (name == "mock") return BackendKind::Mock;
  if (name == "synthetic") return BackendKind::Synthetic;
  throw Error(ErrorCode::InvalidDescriptor, "unknown backend kind '" + std::string(name) + "'");
}

void BackendDescriptor::validate() const {
  if (id.empty()) throw Error(ErrorCode::InvalidDescriptor, "backend id is empty");
  bool http = kind == BackendKind::HttpGeneration || kind == BackendKind::HttpJudge || kind == BackendKind::HttpReward;
  if (http) {
    if (!endpoint || endpoint->empty()) throw Error(ErrorCode::InvalidDescriptor, id + ": HTTP backends need an endpoint");
    if (!model_name || model_name->empty()) {
      throw Error(ErrorCode::InvalidDescriptor, id + ": HTTP backends need a model_name");
    }
  } else if (endpoint || model_name) {
    throw Error(ErrorCode::InvalidDescriptor, id + ": mock and synthetic backends take no endpoint or model_name");
  }
  if (max_concurrency < 1) throw Error(ErrorCode::InvalidDescriptor, id + ": max_concurrency must be positive");
  if (timeout.count() <= 0) throw Error(ErrorCode::InvalidDescriptor, id + ": timeout must be positive");
  if (retry_limit < 0 || retry_limit > 10) throw Error(ErrorCode::InvalidDescriptor, id + ": retry_limit must be in [0, 10]");
  if (!options.is_object()) throw Error(ErrorCode::InvalidDescriptor, id + ": options must be an object");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::FirstWins: return "first_wins";
    case Verdict::SecondWins: return "second_wins";
    case Verdict::Tie: return "tie";
  }
  return "tie";
}

Verdict parse_verdict_name(std::string_view name) {
  if (name == "first_wins") return Verdict::FirstWins;
  if (name == "second_wins") return Verdict::SecondWins;
  if (name == "tie") return Verdict::Tie;
  throw Error(ErrorCode::ParseError, "unknown verdict '" + std::string(name) + "'");
}

Verdict mirror(Verdict v) {
  switch (v) {
    case Verdict::FirstWins: return Verdict::SecondWins;
    case Verdict::SecondWins: return Verdict::FirstWins;
    case Verdict::Tie: return Verdict::Tie;
  }
  return Verdict::Tie;
}

std::string_view to_string(ChecklistMode mode) {
  switch (mode) {
    case ChecklistMode::InCall: return "in_call";
    case ChecklistMode::Off: return "off";
    case ChecklistMode::SeparateCall: return "separate_call";
  }
  return "in_call";
}

ChecklistMode parse_checklist_mode(std::string_view name) {
  for (auto m : {ChecklistMode::InCall, ChecklistMode::Off, ChecklistMode::SeparateCall}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown checklist mode '" + std::string(name) + "'");
}

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Verdict token right after `pos` in lowercase text, skipping decoration.
std::optional<Verdict> verdict_after(const std::string& text, std::size_t pos) {
  while (pos < text.size() && (text[pos] == ' ' || text[pos] == '*' || text[pos] == '"' || text[pos] == '\'' ||
                               text[pos] == '[' || text[pos] == '(' || text[pos] == '`' || text[pos] == '\t')) {
    ++pos;
  }
  auto token_is = [&](std::string_view word) {
    if (text.compare(pos, word.size(), word) != 0) return false;
    std::size_t end = pos + word.size();
    return end >= text.size() || !is_word_char(text[end]);
  };
  if (token_is("a") || token_is("response a") || token_is("assistant a")) return Verdict::FirstWins;
  if (token_is("b") || token_is("response b") || token_is("assistant b")) return Verdict::SecondWins;
  if (token_is("tie") || token_is("draw")) return Verdict::Tie;
  return std::nullopt;
}

}  // namespace

Verdict parse_preference(std::string_view raw) {
  std::string text = lowercase(raw);
  std::optional<Verdict> found;
  std::size_t found_at = 0;
  auto consider = [&](std::size_t at, Verdict v) {
    if (!found || at >= found_at) {
      found = v;
      found_at = at;
    }
  };
  for (std::size_t pos = text.find("winner"); pos != std::string::npos; pos = text.find("winner", pos + 1)) {
    std::size_t p = pos + 6;
    while (p < text.size() && (text[p] == ' ' || text[p] == '*')) ++p;
    if (p < text.size() && text[p] == ':') {
      if (auto v = verdict_after(text, p + 1)) consider(pos, *v);
    }
  }
  static constexpr std::pair<std::string_view, Verdict> kBracketed[] = {
      {"[[a]]", Verdict::FirstWins}, {"[[b]]", Verdict::SecondWins}, {"[[c]]", Verdict::Tie}, {"[[tie]]", Verdict::Tie}};
  for (const auto& [label, verdict] : kBracketed) {
    auto pos = text.rfind(label);
    if (pos != std::string::npos) consider(pos, verdict);
  }
  if (!found) throw Error(ErrorCode::UnparseableVerdict, "no pairwise verdict in judge output");
  return *found;
}

std::size_t parse_one_pass(std::string_view raw, std::size_t candidate_count) {
  std::string text = lowercase(raw);
  auto pos = text.rfind("best response");
  if (pos == std::string::npos) throw Error(ErrorCode::UnparseableVerdict, "no 'Best response' line in judge output");
  std::size_t p = pos + std::string_view("best response").size();
  // Allow short decoration such as ": ", "**: #", ": candidate [".
  std::size_t limit = std::min(text.size(), p + 24);
  while (p < limit && !std::isdigit(static_cast<unsigned char>(text[p]))) {
    if (text[p] == '\n') break;
    ++p;
  }
  if (p >= text.size() || !std::isdigit(static_cast<unsigned char>(text[p]))) {
    throw Error(ErrorCode::UnparseableVerdict, "no candidate number after 'Best response'");
  }
  std::size_t value = 0;
  while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) {
    value = value * 10 + static_cast<std::size_t>(text[p] - '0');
    if (value > 1'000'000) break;
    ++p;
  }
  if (value < 1 || value > candidate_count) {
    throw Error(ErrorCode::IndexOutOfRange,
                "judge named candidate " + std::to_string(value) + " of " + std::to_string(candidate_count));
  }
  return value - 1;
}

std::string pairwise_template_version(const JudgeTemplates& templates, PairKind kind) {
  return JudgeTemplates::version_of(kind == PairKind::InLanguage ? templates.pairwise
                                                                 : templates.pairwise_cross_lingual);
}

std::string one_pass_template_version(const JudgeTemplates& templates, ChecklistMode mode) {
  switch (mode) {
    case ChecklistMode::InCall: return JudgeTemplates::version_of(templates.chops);
    case ChecklistMode::Off: return JudgeTemplates::version_of(templates.one_pass);
    case ChecklistMode::SeparateCall:
      return JudgeTemplates::version_of(templates.checklist + "\x1f" + templates.chops_given_checklist);
  }
  return {};
}

std::vector<double> token_distribution(std::span<const double> logits, const DecodeParams& params) {
  if (logits.empty()) throw Error(ErrorCode::NonFiniteLogits, "empty logit vector");
  for (double l : logits) {
    if (!std::isfinite(l)) throw Error(ErrorCode::NonFiniteLogits, "logits must be finite");
  }
  std::vector<double> probs(logits.size(), 0.0);
  std::size_t top = first_argmax(logits);
  if (params.greedy()) {
    probs[top] = 1.0;
    return probs;
  }
  // softmax(l / tau), shifted by the max logit for stability.
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp((logits[i] - logits[top]) / params.temperature);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  if (params.min_p > 0.0) {
    double threshold = params.min_p * probs[top];
    double kept = 0.0;
    for (double& p : probs) {
      if (p < threshold) p = 0.0;
      kept += p;
    }
    for (double& p : probs) p /= kept;
  }
  return probs;
}

std::size_t mock_next_token(std::span<const double> logits, const DecodeParams& params, DeterministicRng& rng) {
  auto probs = token_distribution(logits, params);
  if (params.greedy()) return first_argmax(logits);
  double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_supported = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] == 0.0) continue;
    last_supported = i;
    acc += probs[i];
    if (u < acc) return i;
  }
  return last_supported;  // rounding slack lands on a supported token
}

std::unique_ptr<GenerationBackend> make_generation_backend(const BackendDescriptor& d, const JudgeTemplates& templates) {
  d.validate();
  switch (d.kind) {
    case BackendKind::Mock: return std::make_unique<MockGenerator>(d);
    case BackendKind::Synthetic: return std::make_unique<SyntheticGenerator>(d);
    case BackendKind::HttpGeneration: return std::make_unique<HttpGenerator>(d, templates);
    default: break;
  }
  throw Error(ErrorCode::InvalidDescriptor, d.id + ": kind '" + std::string(to_string(d.kind)) + "' cannot generate");
}

std::unique_ptr<JudgeBackend> make_judge_backend(const BackendDescriptor& d, const JudgeTemplates& templates) {
  d.validate();
  switch (d.kind) {
    case BackendKind::Mock: return std::make_unique<MockJudge>(d, templates);
    case BackendKind::Synthetic: return std::make_unique<SyntheticJudge>(d, templates);
    case BackendKind::HttpJudge: return std::make_unique<HttpJudge>(d, templates);
    default: break;
  }
  throw Error(ErrorCode::InvalidDescriptor, d.id + ": kind '" + std::string(to_string(d.kind)) + "' cannot judge");
}

std::unique_ptr<RewardBackend> make_reward_backend(const BackendDescriptor& d) {
  d.validate();
  switch (d.kind) {
    case BackendKind::Mock: return std::make_unique<MockReward>(d);
    case BackendKind::Synthetic: return std::make_unique<SyntheticReward>(d);
    case BackendKind::HttpReward: return std::make_unique<HttpReward>(d);
    default: break;
  }
  throw Error(ErrorCode::InvalidDescriptor, d.id + ": kind '" + std::string(to_string(d.kind)) + "' cannot score");
}

}  // namespace polysel
