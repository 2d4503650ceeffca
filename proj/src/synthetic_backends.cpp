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

#include "polysel/synthetic_backends.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace polysel {
namespace {

constexpr std::string_view kMarkerOpen = " [[q=";
constexpr std::string_view kMarkerClose = "]]";

constexpr std::string_view kSyllables[] = {"ka", "lo", "mi", "ne", "ru", "sa", "to", "vi", "ze", "po", "qu", "da"};

std::string pseudo_word(std::uint64_t h) {
  std::string w;
  for (int i = 0; i < 3; ++i) {
    w += kSyllables[h % std::size(kSyllables)];
    h /= std::size(kSyllables);
  }
  return w;
}

// Alternative answer used when a simulated math solution is wrong.
std::string wrong_answer(const std::string& gold, std::uint64_t h) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(gold.data(), gold.data() + gold.size(), value);
  if (ec == std::errc() && ptr == gold.data() + gold.size()) {
    return std::to_string(value + 1 + static_cast<long long>(h % 9));
  }
  return gold + "x";
}

}  // namespace

double SyntheticProfile::mean_quality(double temperature) const {
  double over = std::max(0.0, temperature - breakpoint);
  return base_quality - decay_rate * over * over;
}

double SyntheticProfile::quality_stddev(double temperature) const { return noise_rate * temperature; }

void SyntheticProfile::validate() const {
  if (!(base_quality > 0.0 && base_quality <= 1.0)) {
    throw Error(ErrorCode::InvalidDescriptor, "synthetic base_quality must lie in (0, 1]");
  }
  if (!(breakpoint >= 0.0) || !(decay_rate >= 0.0) || !(noise_rate >= 0.0)) {
    throw Error(ErrorCode::InvalidDescriptor, "synthetic breakpoint, decay_rate and noise_rate must be >= 0");
  }
}

const SyntheticProfile& SyntheticProfiles::for_language(const LanguageTag& language) const {
  auto it = by_language.find(language.code());
  return it == by_language.end() ? fallback : it->second;
}

SyntheticProfiles SyntheticProfiles::from_options(const nlohmann::json& options) {
  auto parse = [](const nlohmann::json& j) {
    SyntheticProfile p;
    p.base_quality = j.value("base_quality", p.base_quality);
    p.breakpoint = j.value("breakpoint", p.breakpoint);
    p.decay_rate = j.value("decay_rate", p.decay_rate);
    p.noise_rate = j.value("noise_rate", p.noise_rate);
    p.validate();
    return p;
  };
  SyntheticProfiles out;
  if (!options.contains("profiles")) return out;
  for (const auto& [lang, body] : options.at("profiles").items()) {
    if (lang == "default") {
      out.fallback = parse(body);
    } else {
      out.by_language.emplace(LanguageTag(lang).code(), parse(body));
    }
  }
  return out;
}

std::string synthetic_text(double quality, std::string_view body) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", quality);
  std::string out(body);
  out += kMarkerOpen;
  out += buf;
  out += kMarkerClose;
  return out;
}

std::optional<double> synthetic_quality(std::string_view text) {
  auto open = text.rfind(kMarkerOpen);
  if (open == std::string_view::npos) return std::nullopt;
  auto start = open + kMarkerOpen.size();
  auto close = text.find(kMarkerClose, start);
  if (close == std::string_view::npos) return std::nullopt;
  std::string number(text.substr(start, close - start));
  char* end = nullptr;
  double q = std::strtod(number.c_str(), &end);
  if (end != number.c_str() + number.size() || !std::isfinite(q)) return std::nullopt;
  return q;
}

double require_synthetic_quality(std::string_view text) {
  auto q = synthetic_quality(text);
  if (!q) throw Error(ErrorCode::MalformedResponse, "text carries no synthetic quality marker");
  return *q;
}

SyntheticGenerator::SyntheticGenerator(const BackendDescriptor& d)
    : id_(d.id), profiles_(SyntheticProfiles::from_options(d.options)), words_(d.options.value("words", std::size_t{16})) {
  if (words_ < 2) throw Error(ErrorCode::InvalidDescriptor, id_ + ": words must be at least 2");
}

std::vector<Sample> SyntheticGenerator::generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                                                 const std::optional<LanguageTag>& respond_in, CallLedger& ledger) {
  params.validate();
  if (n < 1) throw Error(ErrorCode::InvalidParams, "n must be at least 1");
  if (params.greedy() && n != 1) throw Error(ErrorCode::InvalidParams, "greedy decoding takes n == 1");
  ++ledger.generation_calls;

  LanguageTag language = respond_in.value_or(prompt.language);
  const SyntheticProfile& profile = profiles_.for_language(language);
  std::uint64_t context = digest64(prompt.text + '\x1f' + language.code());
  double mean = profile.mean_quality(params.temperature);
  double stddev = profile.quality_stddev(params.temperature);

  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    // Greedy output ignores the seed entirely.
    std::uint64_t stream = params.greedy() ? mix64(context, 0x67726565647ULL)
                                           : mix64(mix64(params.seed.value_or(0), context), static_cast<std::uint64_t>(i));
    DeterministicRng rng(stream);
    double quality = std::clamp(mean + stddev * rng.normal(), 0.0, 1.0);

    std::string body;
    std::vector<double> logprobs;
    for (std::size_t w = 0; w < words_; ++w) {
      bool drift = rng.uniform() >= quality;
      std::uint64_t h = drift ? rng.next_u64() : mix64(context, w);
      if (!body.empty()) body += ' ';
      body += pseudo_word(h);
      if (!language.is_english()) body += "_" + language.code();
      logprobs.push_back(drift ? -2.5 - rng.uniform() : -0.2 - 0.3 * rng.uniform());
    }
    if (prompt.answer) {
      bool correct = rng.uniform() < quality;
      body += ". The answer is " + (correct ? *prompt.answer : wrong_answer(*prompt.answer, context)) + ".";
    }
    Sample s;
    s.text = synthetic_text(quality, body);
    s.token_logprobs = std::move(logprobs);
    s.params = params;
    s.language = language;
    s.provenance = params.greedy() ? Provenance::Greedy
                   : language != prompt.language ? Provenance::CrossLingualEvidence
                                                 : Provenance::Stochastic;
    out.push_back(std::move(s));
  }
  return out;
}

SyntheticJudge::SyntheticJudge(const BackendDescriptor& d, const JudgeTemplates& templates)
    : id_(d.id),
      noise_(d.options.value("noise", 0.0)),
      seed_(d.options.value("seed", std::uint64_t{0})),
      templates_(templates) {
  if (!(noise_ >= 0.0 && noise_ <= 1.0)) throw Error(ErrorCode::InvalidDescriptor, id_ + ": noise must lie in [0, 1]");
}

std::string SyntheticJudge::template_version(PairKind kind) const {
  return pairwise_template_version(templates_, kind);
}

std::string SyntheticJudge::template_version(ChecklistMode mode) const {
  return one_pass_template_version(templates_, mode);
}

Preference SyntheticJudge::pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind,
                                    CallLedger& ledger) {
  if (a.text.empty() || b.text.empty()) throw Error(ErrorCode::InvalidParams, "cannot judge an empty text");
  double qa = require_synthetic_quality(a.text);
  double qb = require_synthetic_quality(b.text);
  ++ledger.judge_pairwise_calls;
  Verdict v = qa > qb ? Verdict::FirstWins : qa < qb ? Verdict::SecondWins : Verdict::Tie;
  if (noise_ > 0.0) {
    DeterministicRng rng(mix64(seed_, digest64(prompt.text + '\x1f' + a.text + '\x1f' + b.text)));
    if (rng.uniform() < noise_) v = mirror(v);
  }
  static constexpr std::string_view kLabels[] = {"A", "B", "Tie"};
  return {v, "Winner: " + std::string(kLabels[static_cast<int>(v)])};
}

OnePassVerdict SyntheticJudge::one_pass(const PromptRecord& prompt, std::span<const Sample> candidates,
                                        ChecklistMode mode, CallLedger& ledger) {
  if (candidates.size() < 2) throw Error(ErrorCode::InvalidParams, "one-pass judging needs at least two candidates");
  std::vector<double> qualities;
  std::string joined = prompt.text;
  for (const auto& c : candidates) {
    qualities.push_back(require_synthetic_quality(c.text));
    joined += '\x1f' + c.text;
  }
  ledger.judge_onepass_calls += mode == ChecklistMode::SeparateCall ? 2 : 1;
  std::size_t chosen = first_argmax(qualities);
  if (noise_ > 0.0) {
    DeterministicRng rng(mix64(seed_, digest64(joined)));
    if (rng.uniform() < noise_) chosen = rng.below(candidates.size());
  }
  std::string rationale = "Checklist: overall quality.\nBest response: " + std::to_string(chosen + 1);
  return {chosen, rationale};
}

SyntheticReward::SyntheticReward(const BackendDescriptor& d)
    : id_(d.id), noise_(d.options.value("noise", 0.0)), seed_(d.options.value("seed", std::uint64_t{0})) {
  if (!(noise_ >= 0.0)) throw Error(ErrorCode::InvalidDescriptor, id_ + ": noise must be >= 0");
}

double SyntheticReward::score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) {
  if (candidate.text.empty()) throw Error(ErrorCode::InvalidParams, "cannot score an empty candidate");
  double q = require_synthetic_quality(candidate.text);
  ++ledger.reward_calls;
  if (noise_ == 0.0) return q;
  DeterministicRng rng(mix64(seed_, digest64(prompt.text + '\x1f' + candidate.text)));
  return q + noise_ * rng.normal();
}

}  // namespace polysel
