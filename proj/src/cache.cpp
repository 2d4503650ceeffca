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

#include "polysel/cache.hpp"

#include <fstream>

#include "polysel/serialize.hpp"

namespace polysel {

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  load();
  out_ = std::fopen(file_.c_str(), "ab");
  if (out_ == nullptr) throw Error(ErrorCode::IoError, "cannot open cache file " + file_.string());
}

ResponseCache::~ResponseCache() {
  if (out_ != nullptr) std::fclose(out_);
}

std::string ResponseCache::make_key(const nlohmann::json& material) { return sha256_hex(material.dump()); }

std::string ResponseCache::checksum(const nlohmann::json& record) {
  std::string body = record.at("key").get<std::string>() + '\n' + record.at("kind").get<std::string>() + '\n' +
                     record.at("request_digest").get<std::string>() + '\n' + record.at("response").dump() + '\n' +
                     record.at("timestamp").get<std::string>();
  return sha256_hex(body).substr(0, 16);
}

void ResponseCache::load() {
  if (!std::filesystem::exists(file_)) return;
  std::ifstream in(file_, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read cache file " + file_.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t good_end = 0;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    ++line_no;
    std::size_t nl = content.find('\n', pos);
    bool terminated = nl != std::string::npos;
    std::string_view line(content.data() + pos, (terminated ? nl : content.size()) - pos);
    std::size_t next = terminated ? nl + 1 : content.size();
    bool last = next >= content.size();

    bool ok = false;
    nlohmann::json record;
    if (terminated) {
      try {
        record = nlohmann::json::parse(line);
        ok = record.at("checksum").get<std::string>() == checksum(record);
      } catch (const nlohmann::json::exception&) {
        ok = false;
      }
    }
    if (!ok) {
      if (last) {
        torn_tail_ = true;
        break;
      }
      throw Error(ErrorCode::CacheCorrupt, file_.string() + ": record " + std::to_string(line_no) + " is damaged");
    }
    entries_[record.at("key").get<std::string>()] = record.at("response");
    good_end = next;
    pos = next;
  }
  if (torn_tail_) std::filesystem::resize_file(file_, good_end);
}

void ResponseCache::append(const nlohmann::json& record) {
  if (out_ == nullptr) return;
  std::string line = record.dump() + '\n';
  std::lock_guard lock(write_mutex_);
  if (std::fwrite(line.data(), 1, line.size(), out_) != line.size() || std::fflush(out_) != 0) {
    throw Error(ErrorCode::IoError, "failed to append to cache file " + file_.string());
  }
}

ResponseCache::Lookup ResponseCache::lookup_or_call(const std::string& key, const std::string& kind,
                                                    const std::string& request_digest,
                                                    const std::function<nlohmann::json()>& call) {
  std::promise<nlohmann::json> promise;
  {
    std::unique_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return {it->second, true};
    if (auto it = in_flight_.find(key); it != in_flight_.end()) {
      auto pending = it->second;
      lock.unlock();
      return {pending.get(), true};
    }
    in_flight_.emplace(key, promise.get_future().share());
  }

  nlohmann::json response;
  try {
    response = call();
    nlohmann::json record = {{"key", key},
                             {"kind", kind},
                             {"request_digest", request_digest},
                             {"response", response},
                             {"timestamp", utc_timestamp()}};
    record["checksum"] = checksum(record);
    append(record);
  } catch (...) {
    std::unique_lock lock(mutex_);
    in_flight_.erase(key);
    promise.set_exception(std::current_exception());
    throw;
  }
  {
    std::unique_lock lock(mutex_);
    entries_[key] = response;
    in_flight_.erase(key);
  }
  promise.set_value(response);
  return {std::move(response), false};
}

std::optional<nlohmann::json> ResponseCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return std::optional<nlohmann::json>(std::in_place, it->second);
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

namespace {

template <typename F>
auto gated(const CallPolicy& policy, F&& fn) {
  if (policy.gate) return policy.gate->run(std::forward<F>(fn));
  return fn();
}

/// Runs `call` through the cache when one is configured.
nlohmann::json through_cache(const CallPolicy& policy, const nlohmann::json& material, const std::string& kind,
                             CallLedger& ledger, const std::function<nlohmann::json()>& call) {
  if (!policy.cache) return gated(policy, call);
  std::string digest = sha256_hex(material.dump());
  std::string key = ResponseCache::make_key({{"digest", digest}, {"kind", kind}});
  auto result = policy.cache->lookup_or_call(key, kind, digest, [&] { return gated(policy, call); });
  if (result.hit) ++ledger.cached_hits;
  return std::move(result.response);
}

nlohmann::json prompt_material(const std::string& backend, const std::string& op, const PromptRecord& prompt) {
  return {{"backend", backend}, {"op", op}, {"prompt", prompt.text}, {"language", prompt.language}};
}

}  // namespace

CachedGenerator::CachedGenerator(std::shared_ptr<GenerationBackend> inner, CallPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {}

std::vector<Sample> CachedGenerator::generate(const PromptRecord& prompt, const DecodeParams& params, int n,
                                              const std::optional<LanguageTag>& respond_in, CallLedger& ledger) {
  auto material = prompt_material(inner_->id(), "generate", prompt);
  material["params"] = params;
  material["n"] = n;
  material["respond_in"] = respond_in ? nlohmann::json(*respond_in) : nlohmann::json(nullptr);
  material["template"] = inner_->template_version();
  auto response = through_cache(policy_, material, "generate", ledger, [&] {
    return nlohmann::json(inner_->generate(prompt, params, n, respond_in, ledger));
  });
  return response.get<std::vector<Sample>>();
}

CachedJudge::CachedJudge(std::shared_ptr<JudgeBackend> inner, CallPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {}

Preference CachedJudge::pairwise(const PromptRecord& prompt, const Sample& a, const Sample& b, PairKind kind,
                                 CallLedger& ledger) {
  auto material = prompt_material(inner_->id(), "pairwise", prompt);
  material["pair_kind"] = kind == PairKind::InLanguage ? "in_language" : "cross_lingual";
  material["candidates"] = {a.text, b.text};
  material["template"] = inner_->template_version(kind);
  auto response = through_cache(policy_, material, "pairwise", ledger, [&] {
    return nlohmann::json(inner_->pairwise(prompt, a, b, kind, ledger));
  });
  return response.get<Preference>();
}

OnePassVerdict CachedJudge::one_pass(const PromptRecord& prompt, std::span<const Sample> candidates, ChecklistMode mode,
                                     CallLedger& ledger) {
  auto material = prompt_material(inner_->id(), "one_pass", prompt);
  material["checklist"] = to_string(mode);
  nlohmann::json texts = nlohmann::json::array();
  for (const auto& c : candidates) texts.push_back(c.text);
  material["candidates"] = std::move(texts);
  material["template"] = inner_->template_version(mode);
  auto response = through_cache(policy_, material, "one_pass", ledger, [&] {
    auto v = inner_->one_pass(prompt, candidates, mode, ledger);
    return nlohmann::json{{"chosen_index", v.chosen_index}, {"rationale", v.rationale}};
  });
  return {response.at("chosen_index").get<std::size_t>(), response.at("rationale").get<std::string>()};
}

CachedReward::CachedReward(std::shared_ptr<RewardBackend> inner, CallPolicy policy)
    : inner_(std::move(inner)), policy_(std::move(policy)) {}

double CachedReward::score(const PromptRecord& prompt, const Sample& candidate, CallLedger& ledger) {
  auto material = prompt_material(inner_->id(), "reward", prompt);
  material["candidates"] = {candidate.text};
  auto response = through_cache(policy_, material, "reward", ledger, [&] {
    return nlohmann::json{{"score", inner_->score(prompt, candidate, ledger)}};
  });
  return response.at("score").get<double>();
}

}  // namespace polysel
