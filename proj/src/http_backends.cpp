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

#include "polysel/http_backends.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace polysel {
namespace {

void split_endpoint(const std::string& endpoint, std::string& host, std::string& prefix) {
  auto scheme = endpoint.find("://");
  std::size_t path_start = endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host = endpoint.substr(0, path_start);
  prefix = path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
}

}  // namespace

OpenAiChatClient::OpenAiChatClient(const BackendDescriptor& d)
    : descriptor_(d),
      extended_sampling_(d.options.value("extended_sampling", true)),
      backoff_ms_(d.options.value("backoff_ms", 500)) {
  d.validate();
  split_endpoint(*d.endpoint, host_, prefix_);
  bool versioned = prefix_.size() >= 3 && prefix_.compare(prefix_.size() - 3, 3, "/v1") == 0;
  chat_path_ = d.options.value("chat_path", std::string(versioned ? "/chat/completions" : "/v1/chat/completions"));
  if (d.auth_env_var) {
    const char* value = std::getenv(d.auth_env_var->c_str());
    if (value == nullptr || *value == '\0') {
      throw Error(ErrorCode::AuthMissing, d.id + ": environment variable " + *d.auth_env_var + " is not set");
    }
    token_ = value;
  }
}

nlohmann::json OpenAiChatClient::request_body(const ChatRequest& request) const {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = {
      {"model", *descriptor_.model_name},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"n", request.n},
  };
  if (request.seed) body["seed"] = *request.seed;
  if (request.logprobs) body["logprobs"] = true;
  if (extended_sampling_) {
    if (request.min_p && *request.min_p > 0.0) body["min_p"] = *request.min_p;
    if (request.top_k) body["top_k"] = *request.top_k;
  }
  return body;
}

nlohmann::json OpenAiChatClient::post_json(const std::string& path, const nlohmann::json& body) const {
  httplib::Headers headers;
  if (token_) headers.emplace("Authorization", "Bearer " + *token_);
  const std::string payload = body.dump();
  const std::string full_path = prefix_ + path;
  auto timeout = descriptor_.timeout;
  std::string last_problem;
  bool transport_failure = false;
  for (int attempt = 0; attempt <= descriptor_.retry_limit; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms_ << (attempt - 1)));
    httplib::Client client(host_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(full_path, headers, payload, "application/json");
    if (!res) {
      transport_failure = true;
      last_problem = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      transport_failure = false;
      last_problem = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::BackendError,
                  descriptor_.id + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, descriptor_.id + ": response is not JSON: " + e.what());
    }
  }
  throw Error(transport_failure ? ErrorCode::BackendTimeout : ErrorCode::BackendError,
              descriptor_.id + ": giving up after " + std::to_string(descriptor_.retry_limit + 1) +
                  " attempts: " + last_problem);
}

std::vector<ChatChoice> OpenAiChatClient::parse_response(const nlohmann::json& response, std::size_t expected) {
  try {
    const auto& choices = response.at("choices");
    if (!choices.is_array() || choices.size() != expected) {
      throw Error(ErrorCode::MalformedResponse, "expected " + std::to_string(expected) + " choices");
    }
    std::vector<ChatChoice> out;
    for (const auto& choice : choices) {
      ChatChoice c;
      const auto& content = choice.at("message").at("content");
      if (!content.is_string()) throw Error(ErrorCode::MalformedResponse, "choice content is not a string");
      c.text = content.get<std::string>();
      if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
          choice["logprobs"]["content"].is_array()) {
        std::vector<double> lp;
        for (const auto& tok : choice["logprobs"]["content"]) lp.push_back(tok.at("logprob").get<double>());
        c.token_logprobs = std::move(lp);
      }
      out.push_back(std::move(c));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("unexpected chat-completions shape: ") + e.what());
  }
}

std::vector<ChatChoice> OpenAiChatClient::complete(const ChatRequest& request) const {
  auto response = post_json(chat_path_, request_body(request));
  return parse_response(response, static_cast<std::size_t>(request.n));
}

HttpGenerator::HttpGenerator(const BackendDescriptor& d, const JudgeTemplates& templates)
    : client_(d), templates_(templates), logprobs_(d.options.value("logprobs", true)) {
  if (d.kind != BackendKind::HttpGeneration) throw Error(ErrorCode::InvalidDescriptor, d.id + ": not a generation backend");
}

std::string HttpGenerator::template_version() const { return JudgeTemplates::version_of(templates_.respond_in); }

std::vector<Sample> HttpGenerator::generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                                            const std::optional<LanguageTag>& respond_in, CallLedger& ledger) {
  params.validate();
  if (n < 1) throw Error(ErrorCode::InvalidParams, "n must be at least 1");
  if (params.greedy() && n != 1) throw Error(ErrorCode::InvalidParams, "greedy decoding takes n == 1");
  ChatRequest request;
  std::string content = prompt.text;
  if (respond_in) {
    content = fill_template(templates_.respond_in, {{"language", respond_in->display_name()}, {"prompt", prompt.text}});
  }
  request.messages.push_back({"user", std::move(content)});
  request.temperature = params.temperature;
  request.max_tokens = params.max_tokens;
  request.seed = params.seed;
  request.n = n;
  request.logprobs = logprobs_;
  if (params.greedy()) {
    request.top_k = 1;
  } else {
    request.min_p = params.min_p;
  }
  ++ledger.generation_calls;
  auto choices = client_.complete(request);

  LanguageTag language = respond_in.value_or(prompt.language);
  std::vector<Sample> out;
  for (auto& c : choices) {
    Sample s;
    s.text = std::move(c.text);
    s.token_logprobs = std::move(c.token_logprobs);
    s.params = params;
    s.language = language;
    s.provenance = params.greedy() ? Provenance::Greedy
                   : language != prompt.language ? Provenance::CrossLingualEvidence
                                                 : Provenance::Stochastic;
    out.push_back(std::move(s));
  }
  return out;
}

HttpJudge::HttpJudge(const BackendDescriptor& d, const JudgeTemplates& templates)
    : client_(d), templates_(templates), max_tokens_(d.options.value("judge_max_tokens", 1024)) {
  if (d.kind != BackendKind::HttpJudge) throw Error(ErrorCode::InvalidDescriptor, d.id + ": not a judge backend");
}

std::string HttpJudge::template_version(PairKind kind) const { return pairwise_template_version(templates_, kind); }

std::string HttpJudge::template_version(ChecklistMode mode) const {
  return one_pass_template_version(templates_, mode);
}

std::string HttpJudge::ask(std::vector<ChatMessage>& messages) const {
  ChatRequest request;
  request.messages = messages;
  request.temperature = 0.0;
  request.top_k = 1;
  request.max_tokens = max_tokens_;
  auto choices = client_.complete(request);
  messages.push_back({"assistant", choices.front().text});
  return choices.front().text;
}

Preference HttpJudge::pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                               CallLedger& ledger) {
  if (a.text.empty() || b.text.empty()) throw Error(ErrorCode::InvalidParams, "cannot judge an empty text");
  const std::string& tmpl = kind == PairKind::InLanguage ? templates_.pairwise : templates_.pairwise_cross_lingual;
  std::vector<ChatMessage> messages{
      {"user", fill_template(tmpl, {{"prompt", prompt.text}, {"candidate_a", a.text}, {"candidate_b", b.text}})}};
  int retries = client_.descriptor().retry_limit;
  for (int attempt = 0;; ++attempt) {
    ++ledger.judge_pairwise_calls;
    std::string raw = ask(messages);
    try {
      return {parse_preference(raw), raw};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableVerdict || attempt >= retries) throw;
    }
    messages.push_back({"user", templates_.reask_pairwise});
  }
}

OnePassVerdict HttpJudge::one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                                   CallLedger& ledger) {
  if (candidates.size() < 2) throw Error(ErrorCode::InvalidParams, "one-pass judging needs at least two candidates");
  std::string block = format_candidates(candidates);
  std::string checklist;
  std::string content;
  switch (mode) {
    case ChecklistMode::InCall:
      content = fill_template(templates_.chops, {{"prompt", prompt.text}, {"candidates", block}});
      break;
    case ChecklistMode::Off:
      content = fill_template(templates_.one_pass, {{"prompt", prompt.text}, {"candidates", block}});
      break;
    case ChecklistMode::SeparateCall: {
      std::vector<ChatMessage> first{{"user", fill_template(templates_.checklist, {{"prompt", prompt.text}})}};
      ++ledger.judge_onepass_calls;
      checklist = ask(first);
      content = fill_template(templates_.chops_given_checklist,
                              {{"prompt", prompt.text}, {"checklist", checklist}, {"candidates", block}});
      break;
    }
  }
  std::vector<ChatMessage> messages{{"user", std::move(content)}};
  int retries = client_.descriptor().retry_limit;
  for (int attempt = 0;; ++attempt) {
    ++ledger.judge_onepass_calls;
    std::string raw = ask(messages);
    try {
      std::size_t index = parse_one_pass(raw, candidates.size());
      return {index, checklist.empty() ? raw : checklist + "\n\n" + raw};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableVerdict || attempt >= retries) throw;
    }
    messages.push_back({"user", templates_.reask_one_pass});
  }
}

HttpReward::HttpReward(const BackendDescriptor& d)
    : client_(d), path_(d.options.value("reward_path", std::string("/v1/reward"))) {
  if (d.kind != BackendKind::HttpReward) throw Error(ErrorCode::InvalidDescriptor, d.id + ": not a reward backend");
}

double HttpReward::parse_score(const nlohmann::json& response) {
  const nlohmann::json* value = nullptr;
  if (response.contains("score")) {
    value = &response["score"];
  } else if (response.contains("data") && response["data"].is_array() && !response["data"].empty() &&
             response["data"][0].contains("score")) {
    value = &response["data"][0]["score"];
  } else if (response.contains("rewards") && response["rewards"].is_array() && !response["rewards"].empty()) {
    value = &response["rewards"][0];
  }
  if (value == nullptr || !value->is_number()) throw Error(ErrorCode::MalformedResponse, "reward response has no score");
  double score = value->get<double>();
  if (!std::isfinite(score)) throw Error(ErrorCode::MalformedResponse, "reward score is not finite");
  return score;
}

double HttpReward::score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) {
  if (candidate.text.empty()) throw Error(ErrorCode::InvalidParams, "cannot score an empty candidate");
  nlohmann::json body = {
      {"model", *client_.descriptor().model_name},
      {"messages",
       {{{"role", "user"}, {"content", prompt.text}}, {{"role", "assistant"}, {"content", candidate.text}}}},
  };
  ++ledger.reward_calls;
  return parse_score(client_.post_json(path_, body));
}

std::string format_candidates(std::span<const Sample> candidates) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "[Candidate " + std::to_string(i + 1) + "]\n" + candidates[i].text;
  }
  return out;
}

}  // namespace polysel
