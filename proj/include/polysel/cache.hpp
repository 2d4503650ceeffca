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

// Content-addressed response cache plus the decorators that put it (and the
// concurrency gates) in front of any backend.

#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "polysel/backends.hpp"
#include "polysel/util.hpp"

namespace polysel {

/// Append-only JSONL store, one record per backend call:
///   {"key", "kind", "request_digest", "response", "timestamp", "checksum"}
///
/// Loading tolerates a torn final record (it is dropped and the file is
/// truncated back to the last complete record). Any earlier record that
/// fails to parse or verify raises Error(CacheCorrupt).
class ResponseCache {
 public:
  /// In-memory cache without persistence.
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path file);
  ~ResponseCache();

  ResponseCache(const ResponseCache&) = delete;
  ResponseCache& operator=(const ResponseCache&) = delete;

  struct Lookup {
    nlohmann::json response;
    bool hit = false;
  };

  /// Returns the stored response for `key`, or runs `call`, persists its
  /// result and returns it. Concurrent callers with the same key share one
  /// call; all but the first observe a hit.
  Lookup lookup_or_call(const std::string& key, const std::string& kind, const std::string& request_digest,
                        const std::function<nlohmann::json()>& call);

  std::optional<nlohmann::json> find(const std::string& key) const;
  std::size_t size() const;
  /// True when the last load dropped a torn trailing record.
  bool recovered_torn_tail() const { return torn_tail_; }

  /// Stable key over canonical JSON key material.
  static std::string make_key(const nlohmann::json& material);
  static std::string checksum(const nlohmann::json& record);

 private:
  void load();
  void append(const nlohmann::json& record);

  std::filesystem::path file_;
  std::FILE* out_ = nullptr;
  bool torn_tail_ = false;
  mutable std::shared_mutex mutex_;
  std::mutex write_mutex_;
  std::unordered_map<std::string, nlohmann::json> entries_;
  std::unordered_map<std::string, std::shared_future<nlohmann::json>> in_flight_;
};

/// Shared plumbing for the decorators below: optional cache, optional gate.
struct CallPolicy {
  std::shared_ptr<ResponseCache> cache;
  std::shared_ptr<CallGate> gate;
};

class CachedGenerator final : public GenerationBackend {
 public:
  CachedGenerator(std::shared_ptr<GenerationBackend> inner, CallPolicy policy);

  const std::string& id() const override { return inner_->id(); }
  std::string template_version() const override { return inner_->template_version(); }
  bool provides_logprobs() const override { return inner_->provides_logprobs(); }
  std::vector<Sample> generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                               const std::optional<LanguageTag>& respond_in, CallLedger& ledger) override;

 private:
  std::shared_ptr<GenerationBackend> inner_;
  CallPolicy policy_;
};

class CachedJudge final : public JudgeBackend {
 public:
  CachedJudge(std::shared_ptr<JudgeBackend> inner, CallPolicy policy);

  const std::string& id() const override { return inner_->id(); }
  std::string template_version(PairKind kind) const override { return inner_->template_version(kind); }
  std::string template_version(ChecklistMode mode) const override { return inner_->template_version(mode); }
  Preference pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                      CallLedger& ledger) override;
  OnePassVerdict one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                          CallLedger& ledger) override;

 private:
  std::shared_ptr<JudgeBackend> inner_;
  CallPolicy policy_;
};

class CachedReward final : public RewardBackend {
 public:
  CachedReward(std::shared_ptr<RewardBackend> inner, CallPolicy policy);

  const std::string& id() const override { return inner_->id(); }
  double score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) override;

 private:
  std::shared_ptr<RewardBackend> inner_;
  CallPolicy policy_;
};

}  // namespace polysel
