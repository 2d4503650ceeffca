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

#include <doctest.h>

#include <atomic>
#include <thread>

#include "polysel/cache.hpp"
#include "polysel/mock_backends.hpp"
#include "support.hpp"

using namespace polysel;
using namespace polysel::testing;

namespace {

nlohmann::json counted(int& calls, nlohmann::json value) {
  ++calls;
  return value;
}

void fill(ResponseCache& cache, int records) {
  for (int i = 0; i < records; ++i) {
    cache.lookup_or_call("k" + std::to_string(i), "test", "d", [&] { return nlohmann::json{{"i", i}}; });
  }
}

}  // namespace

TEST_CASE("miss then hit") {
  ResponseCache cache;
  int calls = 0;
  auto first = cache.lookup_or_call("k", "test", "d", [&] { return counted(calls, 7); });
  auto second = cache.lookup_or_call("k", "test", "d", [&] { return counted(calls, 8); });
  CHECK_FALSE(first.hit);
  CHECK(second.hit);
  CHECK(second.response == 7);
  CHECK(calls == 1);
  CHECK(cache.size() == 1);
  CHECK(cache.find("k") == std::optional<nlohmann::json>(std::in_place, 7));
  CHECK_FALSE(cache.find("other"));
}

TEST_CASE("failed calls are not cached") {
  ResponseCache cache;
  CHECK_THROWS_AS(cache.lookup_or_call("k", "t", "d", []() -> nlohmann::json { throw Error(ErrorCode::BackendError, "x"); }),
                  Error);
  int calls = 0;
  auto r = cache.lookup_or_call("k", "t", "d", [&] { return counted(calls, 1); });
  CHECK_FALSE(r.hit);
  CHECK(calls == 1);
}

TEST_CASE("concurrent callers share one call") {
  ResponseCache cache;
  std::atomic<int> calls{0};
  std::atomic<int> hits{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      auto r = cache.lookup_or_call("shared", "t", "d", [&] {
        ++calls;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        return nlohmann::json("v");
      });
      if (r.hit) ++hits;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(calls == 1);
  CHECK(hits == 7);
}

TEST_CASE("records persist across reopen") {
  auto dir = scratch_dir("cache-persist");
  auto file = dir / "nested" / "responses.jsonl";
  {
    ResponseCache cache(file);
    fill(cache, 3);
  }
  ResponseCache again(file);
  CHECK(again.size() == 3);
  CHECK_FALSE(again.recovered_torn_tail());
  CHECK(again.find("k2") == std::optional<nlohmann::json>(std::in_place, nlohmann::json{{"i", 2}}));
  auto lines = read_lines(file);
  REQUIRE(lines.size() == 3);
  auto record = nlohmann::json::parse(lines[0]);
  for (const char* key : {"key", "kind", "request_digest", "response", "timestamp", "checksum"}) {
    CHECK(record.contains(key));
  }
  CHECK(record["checksum"] == ResponseCache::checksum(record));
}

TEST_CASE("a torn final record is dropped and truncated") {
  auto dir = scratch_dir("cache-torn");
  auto file = dir / "responses.jsonl";
  const int n = 4;
  {
    ResponseCache cache(file);
    fill(cache, n + 1);
  }
  auto content = read_file(file);
  auto last_start = content.rfind('\n', content.size() - 2) + 1;
  auto good = content.substr(0, last_start);
  write_file(file, content.substr(0, last_start + (content.size() - last_start) / 2));

  ResponseCache cache(file);
  CHECK(cache.recovered_torn_tail());
  CHECK(cache.size() == n);
  CHECK_FALSE(cache.find("k4"));
  CHECK(read_file(file) == good);

  // Appends after recovery start on a fresh line.
  int calls = 0;
  cache.lookup_or_call("k4", "test", "d", [&] { return counted(calls, 4); });
  CHECK(calls == 1);
  CHECK(read_lines(file).size() == n + 1);
}

TEST_CASE("a final record with a bad checksum counts as torn") {
  auto dir = scratch_dir("cache-badsum");
  auto file = dir / "responses.jsonl";
  {
    ResponseCache cache(file);
    fill(cache, 2);
  }
  auto lines = read_lines(file);
  auto record = nlohmann::json::parse(lines[1]);
  record["response"] = "tampered";
  write_file(file, lines[0] + "\n" + record.dump() + "\n");
  ResponseCache cache(file);
  CHECK(cache.recovered_torn_tail());
  CHECK(cache.size() == 1);
}

TEST_CASE("damage before the final record is fatal") {
  auto dir = scratch_dir("cache-corrupt");
  auto file = dir / "responses.jsonl";
  {
    ResponseCache cache(file);
    fill(cache, 3);
  }
  auto lines = read_lines(file);
  write_file(file, lines[0] + "\n{not json\n" + lines[2] + "\n");
  try {
    ResponseCache cache(file);
    FAIL("expected CacheCorrupt");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CacheCorrupt);
    CHECK(e.detail().find("record 2") != std::string::npos);
  }
}

TEST_CASE("generator decorator keys on the full request") {
  auto inner = std::make_shared<MockGenerator>(descriptor("mock", BackendKind::Mock));
  CachedGenerator gen(inner, CallPolicy{std::make_shared<ResponseCache>(), nullptr});
  auto prompt = open_prompt();
  DecodeParams params{0.7, 0.2, 32, 1};
  CallLedger ledger;

  auto a = gen.generate(prompt, params, 1, std::nullopt, ledger);
  auto b = gen.generate(prompt, params, 1, std::nullopt, ledger);
  CHECK(a == b);
  CHECK(ledger.generation_calls == 1);
  CHECK(ledger.cached_hits == 1);

  SUBCASE("seed") {
    gen.generate(prompt, DecodeParams{0.7, 0.2, 32, 2}, 1, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("temperature") {
    gen.generate(prompt, DecodeParams{0.8, 0.2, 32, 1}, 1, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("min_p") {
    gen.generate(prompt, DecodeParams{0.7, 0.1, 32, 1}, 1, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("response language") {
    gen.generate(prompt, params, 1, LanguageTag("zh"), ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("prompt text") {
    auto other = prompt;
    other.text += "!";
    gen.generate(other, params, 1, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("prompt language") {
    auto other = prompt;
    other.language = LanguageTag("de");
    gen.generate(other, params, 1, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
  SUBCASE("sample count") {
    gen.generate(prompt, params, 2, std::nullopt, ledger);
    CHECK(ledger.generation_calls == 2);
  }
}

TEST_CASE("judge decorator keys on order, pair kind and templates") {
  auto templates = JudgeTemplates::defaults();
  auto inner = std::make_shared<MockJudge>(descriptor("mj", BackendKind::Mock), templates);
  auto cache = std::make_shared<ResponseCache>();
  CachedJudge judge(inner, CallPolicy{cache, nullptr});
  auto prompt = open_prompt();
  CallLedger ledger;
  auto a = sample("long answer"), b = sample("short");

  CHECK(judge.pairwise(prompt, a, b, PairKind::InLanguage, ledger).verdict == Verdict::FirstWins);
  CHECK(judge.pairwise(prompt, a, b, PairKind::InLanguage, ledger).verdict == Verdict::FirstWins);
  CHECK(ledger.judge_pairwise_calls == 1);
  CHECK(judge.pairwise(prompt, b, a, PairKind::InLanguage, ledger).verdict == Verdict::SecondWins);
  CHECK(ledger.judge_pairwise_calls == 2);
  judge.pairwise(prompt, a, b, PairKind::CrossLingual, ledger);
  CHECK(ledger.judge_pairwise_calls == 3);

  auto edited = templates;
  edited.pairwise += "\nBe brief.";
  CachedJudge judge2(std::make_shared<MockJudge>(descriptor("mj", BackendKind::Mock), edited), CallPolicy{cache, nullptr});
  judge2.pairwise(prompt, a, b, PairKind::InLanguage, ledger);
  CHECK(ledger.judge_pairwise_calls == 4);

  std::vector<Sample> cands{a, b};
  auto v1 = judge.one_pass(prompt, cands, ChecklistMode::InCall, ledger);
  auto v2 = judge.one_pass(prompt, cands, ChecklistMode::InCall, ledger);
  CHECK(v1 == v2);
  CHECK(ledger.judge_onepass_calls == 1);
  judge.one_pass(prompt, cands, ChecklistMode::Off, ledger);
  CHECK(ledger.judge_onepass_calls == 2);
  CHECK(ledger.cached_hits == 2);
}

TEST_CASE("reward decorator") {
  auto inner = std::make_shared<MockReward>(descriptor("mr", BackendKind::Mock));
  CachedReward reward(inner, CallPolicy{std::make_shared<ResponseCache>(), std::make_shared<CallGate>(1)});
  auto prompt = open_prompt();
  CallLedger ledger;
  CHECK(reward.score(prompt, sample(std::string(250, 'x')), ledger) == doctest::Approx(0.25));
  CHECK(reward.score(prompt, sample(std::string(250, 'x')), ledger) == doctest::Approx(0.25));
  CHECK(ledger.reward_calls == 1);
  CHECK(ledger.cached_hits == 1);
}

TEST_CASE("call gate bounds concurrency") {
  auto global = std::make_shared<CallGate>(2);
  CallGate local(3, global);
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  parallel_for(12, 6, [&](std::size_t) {
    local.run([&] {
      int now = ++active;
      int seen = peak.load();
      while (now > seen && !peak.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --active;
      return 0;
    });
  });
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}
