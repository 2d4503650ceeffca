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

#include "polysel/mock_backends.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

namespace polysel {
namespace {

constexpr std::array<std::string_view, 32> kWords{
    "able",  "bright", "calm",   "delta", "eager", "fable", "gentle", "harbor", "ivory", "jolly", "kite",
    "lunar", "maple",  "noble",  "ocean", "pearl", "quiet", "river",  "solar",  "tidal", "umber", "vivid",
    "willow", "xenon", "yonder", "zephyr", "amber", "birch", "cedar",  "dune",   "ember", "frost"};

// Token 0 is the end-of-text marker.
constexpr std::size_t kEndToken = 0;

std::string word_for(std::size_t token, const LanguageTag& language) {
  std::string word(kWords[(token - 1) % kWords.size()]);
  if (!language.is_english()) word += "_" + language.code();
  return word;
}

}  // namespace

std::size_t utf8_length(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

MockGenerator::MockGenerator(const BackendDescriptor& d)
    : id_(d.id),
      vocab_size_(d.options.value("vocab_size", std::size_t{24})),
      max_length_(d.options.value("max_length", std::size_t{16})),
      latency_(d.options.value("latency_ms", 0)) {
  if (vocab_size_ < 2 || vocab_size_ > kWords.size() + 1) {
    throw Error(ErrorCode::InvalidDescriptor, id_ + ": vocab_size must be in [2, 33]");
  }
  if (max_length_ < 1) throw Error(ErrorCode::InvalidDescriptor, id_ + ": max_length must be positive");
}

std::vector<double> MockGenerator::logits(std::uint64_t context, std::size_t position, std::size_t previous) const {
  std::vector<double> out(vocab_size_);
  std::uint64_t step = mix64(mix64(context, position), previous);
  for (std::size_t k = 0; k < vocab_size_; ++k) {
    DeterministicRng rng(mix64(step, k));
    out[k] = 6.0 * rng.uniform() - 3.0;
  }
  // The end token only becomes plausible after a few words.
  if (position < 3) out[kEndToken] -= 1000.0;
  return out;
}

std::vector<Sample> MockGenerator::generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                                            const std::optional<LanguageTag>& respond_in, CallLedger& ledger) {
  params.validate();
  if (n < 1) throw Error(ErrorCode::InvalidParams, "n must be at least 1");
  if (params.greedy() && n != 1) throw Error(ErrorCode::InvalidParams, "greedy decoding takes n == 1");
  ++ledger.generation_calls;
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

  LanguageTag language = respond_in.value_or(prompt.language);
  std::uint64_t context = digest64(prompt.text + '\x1f' + language.code());
  std::size_t length_cap = std::min<std::size_t>(max_length_, static_cast<std::size_t>(params.max_tokens));

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    DeterministicRng rng(mix64(mix64(params.seed.value_or(0), context), static_cast<std::uint64_t>(i)));
    std::string text;
    std::vector<double> logprobs;
    std::size_t previous = kEndToken;
    for (std::size_t t = 0; t < length_cap; ++t) {
      auto l = logits(context, t, previous);
      std::size_t token = mock_next_token(l, params, rng);
      // Model log-probability at temperature 1, as an API would report it.
      double lse = 0.0;
      double top = *std::max_element(l.begin(), l.end());
      for (double v : l) lse += std::exp(v - top);
      logprobs.push_back(l[token] - top - std::log(lse));
      if (token == kEndToken) break;
      if (!text.empty()) text += ' ';
      text += word_for(token, language);
      previous = token;
    }
    Sample s;
    s.text = std::move(text);
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

MockJudge::MockJudge(const BackendDescriptor& d, const JudgeTemplates& templates)
    : id_(d.id), mode_(d.options.value("mode", std::string("prefer_longer"))), templates_(templates) {
  static constexpr std::array<std::string_view, 5> kModes{"prefer_longer", "prefer_shorter", "tie", "prefer_first",
                                                          "prefer_second"};
  if (std::find(kModes.begin(), kModes.end(), mode_) == kModes.end()) {
    throw Error(ErrorCode::InvalidDescriptor, id_ + ": unknown mock judge mode '" + mode_ + "'");
  }
}

std::string MockJudge::template_version(PairKind kind) const { return pairwise_template_version(templates_, kind); }

std::string MockJudge::template_version(ChecklistMode mode) const {
  return one_pass_template_version(templates_, mode);
}

Preference MockJudge::pairwise(const PromptRecord&, const Sample& a, const Sample& b, PairKind, CallLedger& ledger) {
  ++ledger.judge_pairwise_calls;
  std::size_t la = utf8_length(a.text);
  std::size_t lb = utf8_length(b.text);
  Verdict v = Verdict::Tie;
  if (mode_ == "prefer_longer") {
    v = la > lb ? Verdict::FirstWins : la < lb ? Verdict::SecondWins : Verdict::Tie;
  } else if (mode_ == "prefer_shorter") {
    v = la < lb ? Verdict::FirstWins : la > lb ? Verdict::SecondWins : Verdict::Tie;
  } else if (mode_ == "prefer_first") {
    v = a.text == b.text ? Verdict::Tie : Verdict::FirstWins;
  } else if (mode_ == "prefer_second") {
    v = a.text == b.text ? Verdict::Tie : Verdict::SecondWins;
  }
  static constexpr std::array<std::string_view, 3> kLabels{"A", "B", "Tie"};
  return {v, "Winner: " + std::string(kLabels[static_cast<int>(v)])};
}

OnePassVerdict MockJudge::one_pass(const PromptRecord&, std::span<const Sample> candidates, ChecklistMode mode,
                                   CallLedger& ledger) {
  if (candidates.size() < 2) throw Error(ErrorCode::InvalidParams, "one-pass judging needs at least two candidates");
  ledger.judge_onepass_calls += mode == ChecklistMode::SeparateCall ? 2 : 1;
  std::vector<double> lengths;
  for (const auto& c : candidates) lengths.push_back(static_cast<double>(utf8_length(c.text)));
  std::size_t chosen = 0;
  if (mode_ == "prefer_longer") chosen = first_argmax(lengths);
  if (mode_ == "prefer_shorter") chosen = first_argmin(lengths);
  if (mode_ == "prefer_second") chosen = candidates.size() - 1;
  return {chosen, "mock " + mode_ + "\nBest response: " + std::to_string(chosen + 1)};
}

MockReward::MockReward(const BackendDescriptor& d)
    : id_(d.id), mode_(d.options.value("mode", std::string("length"))), value_(d.options.value("value", 0.5)) {
  if (mode_ != "length" && mode_ != "constant") {
    throw Error(ErrorCode::InvalidDescriptor, id_ + ": unknown mock reward mode '" + mode_ + "'");
  }
}

double MockReward::score(const PromptRecord&, const Sample& candidate, CallLedger& ledger) {
  if (candidate.text.empty()) throw Error(ErrorCode::InvalidParams, "cannot score an empty candidate");
  ++ledger.reward_calls;
  if (mode_ == "constant") return value_;
  return std::min(1.0, static_cast<double>(utf8_length(candidate.text)) / 1000.0);
}

}  // namespace polysel
