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

// Live backends speaking the OpenAI-compatible chat-completions protocol.
//
// Descriptor options understood here:
//   chat_path          request path (default "/v1/chat/completions", or
//                      "/chat/completions" when the endpoint ends in /v1)
//   reward_path        reward endpoint path (default "/v1/reward")
//   extended_sampling  send min_p and top_k (default true; vLLM-style servers)
//   logprobs           request per-token logprobs (default true)
//   backoff_ms         first retry delay, doubled per attempt (default 500)
//   judge_max_tokens   completion budget for judge calls (default 1024)

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"

namespace polysel {

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<double> min_p;
  std::optional<int> top_k;
  int max_tokens = 512;
  std::optional<std::uint64_t> seed;
  int n = 1;
  bool logprobs = false;
};

struct ChatChoice {
  std::string text;
  std::optional<std::vector<double>> token_logprobs;
};

class OpenAiChatClient {
 public:
  /// Resolves the bearer token from `auth_env_var`; throws Error(AuthMissing)
  /// when the variable is named but unset.
  explicit OpenAiChatClient(const BackendDescriptor& d);

  nlohmann::json request_body(const ChatRequest& request) const;
  std::vector<ChatChoice> complete(const ChatRequest& request) const;
  /// POSTs `body` to `path` relative to the endpoint, retrying transport
  /// failures, 429 and 5xx up to retry_limit times.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body) const;

  static std::vector<ChatChoice> parse_response(const nlohmann::json& response, std::size_t expected);

  const BackendDescriptor& descriptor() const { return descriptor_; }
  bool extended_sampling() const { return extended_sampling_; }

 private:
  BackendDescriptor descriptor_;
  std::string host_;    // scheme://host[:port]
  std::string prefix_;  // path prefix from the endpoint, without trailing '/'
  std::string chat_path_;
  std::optional<std::string> token_;
  bool extended_sampling_;
  int backoff_ms_;
};

class HttpGenerator final : public GenerationBackend {
 public:
  HttpGenerator(const BackendDescriptor& d, const JudgeTemplates& templates);

  const std::string& id() const override { return client_.descriptor().id; }
  std::string template_version() const override;
  bool provides_logprobs() const override { return logprobs_; }
  std::vector<Sample> generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                               const std::optional<LanguageTag>& respond_in, CallLedger& ledger) override;

 private:
  OpenAiChatClient client_;
  JudgeTemplates templates_;
  bool logprobs_;
};

class HttpJudge final : public JudgeBackend {
 public:
  HttpJudge(const BackendDescriptor& d, const JudgeTemplates& templates);

  const std::string& id() const override { return client_.descriptor().id; }
  std::string template_version(PairKind kind) const override;
  std::string template_version(ChecklistMode mode) const override;
  Preference pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                      CallLedger& ledger) override;
  OnePassVerdict one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                          CallLedger& ledger) override;

 private:
  std::string ask(std::vector<ChatMessage>& messages) const;

  OpenAiChatClient client_;
  JudgeTemplates templates_;
  int max_tokens_;
};

/// Reward model behind a JSON endpoint. Request:
///   {"model": ..., "messages": [{"role":"user",...},{"role":"assistant",...}]}
/// Accepted responses: {"score": x}, {"data": [{"score": x}]} or
/// {"rewards": [x]}.
class HttpReward final : public RewardBackend {
 public:
  explicit HttpReward(const BackendDescriptor& d);

  const std::string& id() const override { return client_.descriptor().id; }
  double score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) override;

  static double parse_score(const nlohmann::json& response);

 private:
  OpenAiChatClient client_;
  std::string path_;
};

/// Numbered candidate block used in one-pass judge prompts.
std::string format_candidates(std::span<const Sample> candidates);

}  // namespace polysel
