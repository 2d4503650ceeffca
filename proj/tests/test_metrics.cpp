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

#include <functional>

#include "extraction_cases.hpp"
#include "polysel/metrics.hpp"
#include "polysel/synthetic_backends.hpp"
#include "support.hpp"

using namespace polysel;
using namespace polysel::testing;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

PromptRecord math_prompt(std::optional<std::string> answer) {
  PromptRecord p = open_prompt("m1", "en", "How many apples?");
  p.task = TaskKind::MathReasoning;
  p.answer = std::move(answer);
  return p;
}

MetricRecord metric(std::string id, std::string lang, std::string strategy, std::string name,
                    std::optional<double> value, std::string note = "") {
  return MetricRecord{std::move(id), LanguageTag(std::move(lang)), TaskKind::OpenEnded, std::move(strategy),
                      std::move(name), value, std::move(note)};
}

const ReportCell* find_cell(const QualityReport& r, const std::string& lang, const std::string& strategy,
                            const std::string& name) {
  for (const auto& c : r.cells) {
    if (c.language == lang && c.strategy == strategy && c.metric == name) return &c;
  }
  return nullptr;
}

const RollupCell* find_rollup(const QualityReport& r, bool english, const std::string& strategy,
                              const std::string& name) {
  for (const auto& c : r.rollups) {
    if (c.english == english && c.strategy == strategy && c.metric == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("final answer extraction") {
  for (const auto& c : extraction_cases()) {
    CAPTURE(c.text);
    CHECK(extract_final_answer(c.text) == c.extracted);
    CHECK(exact_match(extract_final_answer(c.text), c.gold) == (c.extracted.empty() ? 0 : 1));
  }
}

TEST_CASE("custom markers replace the defaults") {
  std::vector<std::string> markers{"respuesta:"};
  CHECK(extract_final_answer("Respuesta: 15 y luego 20", markers) == "15");
  CHECK(extract_final_answer("The answer is 4, then 9", markers) == "9");
}

TEST_CASE("answer normalization") {
  CHECK(normalize_answer("042.50") == "42.5");
  CHECK(normalize_answer("-0") == "0");
  CHECK(normalize_answer("-0.0") == "0");
  CHECK(normalize_answer("+7") == "7");
  CHECK(normalize_answer("$1,200") == "1200");
  CHECK(normalize_answer(".5") == "0.5");
  CHECK(normalize_answer("  twelve ") == "twelve");
  CHECK(normalize_answer("1.2.3") == "1.2.3");
  CHECK(exact_match("42.0", "42") == 1);
  CHECK(exact_match("42", "43") == 0);
  CHECK(exact_match("", "43") == 0);
  CHECK(code_of([] { exact_match("1", " "); }) == ErrorCode::InvalidParams);
}

TEST_CASE("exact match scorer") {
  ExactMatchScorer scorer;
  CallLedger ledger;
  std::vector<Sample> samples{sample("The answer is 60."), sample("I get 59"), sample("no idea")};
  CHECK(scorer.score_all(math_prompt("60"), samples, ledger) == std::vector<double>{1, 0, 0});
  CHECK(code_of([&] { scorer.score_all(math_prompt(std::nullopt), samples, ledger); }) == ErrorCode::MissingAnswer);
}

TEST_CASE("synthetic oracle scorer reads the hidden quality") {
  SyntheticOracleScorer scorer;
  CallLedger ledger;
  std::vector<Sample> samples{sample(synthetic_text(0.25)), sample(synthetic_text(0.75, "other body"))};
  auto scores = scorer.score_all(open_prompt(), samples, ledger);
  CHECK(scores[0] == doctest::Approx(0.25));
  CHECK(scores[1] == doctest::Approx(0.75));
  CHECK(code_of([&] { scorer.score(open_prompt(), sample("plain"), ledger); }) == ErrorCode::MalformedResponse);
}

TEST_CASE("scorer factory") {
  auto reward = std::make_shared<TableReward>(std::map<std::string, double>{});
  CHECK(make_scorer({{"kind", to_string(ScorerKind::RewardBacked)}}, reward)->kind() == ScorerKind::RewardBacked);
  CHECK(make_scorer({{"kind", to_string(ScorerKind::ExactMatch)}}, nullptr)->kind() == ScorerKind::ExactMatch);
  CHECK(make_scorer({{"kind", to_string(ScorerKind::SyntheticOracle)}}, nullptr)->kind() ==
        ScorerKind::SyntheticOracle);
  CHECK(make_scorer({{"kind", to_string(ScorerKind::ReferenceScorerPlugin)}, {"command", {"true"}}}, nullptr)->kind() ==
        ScorerKind::ReferenceScorerPlugin);
  for (auto k : {ScorerKind::RewardBacked, ScorerKind::ExactMatch, ScorerKind::ReferenceScorerPlugin,
                 ScorerKind::SyntheticOracle}) {
    CHECK(parse_scorer_kind(to_string(k)) == k);
  }
  CHECK(code_of([] { parse_scorer_kind("bleu"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { make_scorer({{"kind", to_string(ScorerKind::RewardBacked)}}, nullptr); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { make_scorer({{"kind", to_string(ScorerKind::ReferenceScorerPlugin)}}, nullptr); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { make_scorer(nlohmann::json::object(), nullptr); }) == ErrorCode::ConfigError);
}

TEST_CASE("plugin scorer") {
  auto dir = scratch_dir("plugin");
  auto script = dir / "scorer.py";
  write_file(script,
             "import json, sys\n"
             "for line in sys.stdin:\n"
             "    r = json.loads(line)\n"
             "    s = 1.0 if r['hypothesis'] == r['reference'] else len(r['hypothesis']) / 10\n"
             "    print(json.dumps({'id': r['id'], 'score': s}))\n");
  auto prompt = open_prompt("t1", "de", "Translate: Hallo");
  prompt.task = TaskKind::MachineTranslation;
  prompt.reference = "Hello";
  std::vector<Sample> samples{sample("Hello"), sample("Hi"), sample("Good day")};
  CallLedger ledger;

  PluginScorer scorer({"python3", script.string()});
  auto scores = scorer.score_all(prompt, samples, ledger);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0] == doctest::Approx(1.0));
  CHECK(scores[1] == doctest::Approx(0.2));
  CHECK(scores[2] == doctest::Approx(0.8));

  auto no_ref = prompt;
  no_ref.reference.reset();
  CHECK(code_of([&] { scorer.score_all(no_ref, samples, ledger); }) == ErrorCode::MissingReference);

  PluginScorer failing({"python3", "-c", "import sys; sys.exit(3)"});
  CHECK(code_of([&] { failing.score_all(prompt, samples, ledger); }) == ErrorCode::BackendError);

  PluginScorer garbage({"python3", "-c", "print('not json')"});
  CHECK(code_of([&] { garbage.score_all(prompt, samples, ledger); }) == ErrorCode::MalformedResponse);

  PluginScorer partial({"python3", "-c", "import json; print(json.dumps({'id': 't1#0', 'score': 1}))"});
  CHECK(code_of([&] { partial.score_all(prompt, samples, ledger); }) == ErrorCode::MalformedResponse);

  PluginScorer missing_binary({"/nonexistent/polysel-scorer"});
  CHECK(code_of([&] { missing_binary.score_all(prompt, samples, ledger); }) == ErrorCode::BackendError);

  CHECK(code_of([] { PluginScorer empty({}); }) == ErrorCode::ConfigError);
}

TEST_CASE("pool diagnostics") {
  auto d = diagnostics_from_scores(std::vector<double>{0.5, 0.6, 0.7}, 0.5);
  CHECK(d.hope == doctest::Approx(0.4));
  CHECK(d.risk == doctest::Approx(0.0));
  CHECK(d.best_score == 0.7);
  CHECK(d.worst_score == 0.5);

  auto worse = diagnostics_from_scores(std::vector<double>{0.2, 0.5}, 0.5);
  CHECK(worse.risk == doctest::Approx(-0.6));
  CHECK(worse.hope == doctest::Approx(0.0));

  // Negative greedy scores are scaled by their magnitude.
  auto negative = diagnostics_from_scores(std::vector<double>{-2.0, -1.0}, -2.0);
  CHECK(negative.hope == doctest::Approx(0.5));
  CHECK(negative.risk == doctest::Approx(0.0));

  CHECK(code_of([] { diagnostics_from_scores(std::vector<double>{0.1}, 0.0); }) == ErrorCode::ZeroGreedyScore);
  CHECK(code_of([] { diagnostics_from_scores(std::vector<double>{}, 1.0); }) == ErrorCode::InvalidParams);
}

TEST_CASE("pool diagnostics reuse the greedy score") {
  auto reward = std::make_shared<TableReward>(std::map<std::string, double>{{"g", 0.5}, {"a", 0.9}, {"b", 0.3}});
  RewardScorer scorer(reward);
  auto pool = make_pool({"a", "b"});
  auto greedy = sample("g", "en", Provenance::Greedy);
  CallLedger outside;
  auto d = pool_diagnostics(open_prompt(), pool, scorer, greedy, outside);
  CHECK(outside.reward_calls == 3);
  CHECK(d.hope == doctest::Approx(0.8));
  CHECK(d.risk == doctest::Approx(-0.4));

  pool.hypotheses.insert(pool.hypotheses.begin(), greedy);
  CallLedger inside;
  auto d2 = pool_diagnostics(open_prompt(), pool, scorer, greedy, inside);
  CHECK(inside.reward_calls == 3);
  CHECK(d2.hope == doctest::Approx(0.8));
  CHECK(d2.risk == doctest::Approx(-0.4));
}

TEST_CASE("win rates") {
  std::vector<WinRecord> r{{"a", Outcome::Win}, {"b", Outcome::Loss}, {"c", Outcome::Tie}, {"d", Outcome::Win}};
  CHECK(win_rate(r) == doctest::Approx(0.625));
  std::vector<WinRecord> ties{{"a", Outcome::Tie}, {"b", Outcome::Tie}, {"c", Outcome::Tie}, {"d", Outcome::Tie}};
  CHECK(win_rate(ties) == doctest::Approx(0.5));
  CHECK(win_rate_delta(r, ties) == doctest::Approx(0.125));
  CHECK(code_of([] { win_rate(std::vector<WinRecord>{}); }) == ErrorCode::EmptyRecords);
  std::vector<WinRecord> fewer{{"a", Outcome::Win}};
  CHECK(code_of([&] { win_rate_delta(r, fewer); }) == ErrorCode::InvalidParams);
  CHECK(outcome_from_verdict(Verdict::FirstWins) == Outcome::Win);
  CHECK(outcome_from_verdict(Verdict::SecondWins) == Outcome::Loss);
  CHECK(outcome_from_verdict(Verdict::Tie) == Outcome::Tie);
}

TEST_CASE("report aggregation") {
  std::vector<MetricRecord> records{
      metric("e1", "en", "xmbr", "win_rate_delta", 0.1),
      metric("e2", "en", "xmbr", "win_rate_delta", 0.3),
      metric("d1", "de", "xmbr", "win_rate_delta", 0.04),
      metric("j1", "ja", "xmbr", "win_rate_delta", 0.06),
      metric("j2", "ja", "xmbr", "win_rate_delta", std::nullopt, "zero greedy score"),
      metric("e1", "en", "xmbr", "reward_mean", 2.5),
      metric("e2", "en", "xmbr", "reward_mean", 3.5),
  };
  auto report = aggregate_report(records);

  const auto* en = find_cell(report, "en", "xmbr", "win_rate_delta");
  REQUIRE(en);
  CHECK(en->value == doctest::Approx(20.0));
  CHECK(en->n == 2);
  const auto* ja = find_cell(report, "ja", "xmbr", "win_rate_delta");
  REQUIRE(ja);
  CHECK(ja->value == doctest::Approx(6.0));
  CHECK(ja->n == 1);
  CHECK(ja->excluded == 1);
  const auto* raw = find_cell(report, "en", "xmbr", "reward_mean");
  REQUIRE(raw);
  CHECK(raw->value == doctest::Approx(3.0));

  const auto* other = find_rollup(report, false, "xmbr", "win_rate_delta");
  REQUIRE(other);
  REQUIRE(other->value);
  CHECK(*other->value == doctest::Approx(5.0));
  CHECK(other->languages == 2);
  const auto* english = find_rollup(report, true, "xmbr", "win_rate_delta");
  REQUIRE(english);
  CHECK(english->value == std::optional<double>(en->value));

  CHECK(report.exclusions == std::vector<std::string>{"j2: zero greedy score"});
  CHECK(report.notes.empty());

  // Record order does not matter.
  std::reverse(records.begin(), records.end());
  CHECK(report_to_json(aggregate_report(records)) == report_to_json(report));
}

TEST_CASE("English-only reports note the missing roll-up") {
  auto report = aggregate_report({metric("e1", "en", "bon", "hope", 0.2)});
  const auto* other = find_rollup(report, false, "bon", "hope");
  REQUIRE(other);
  CHECK_FALSE(other->value);
  CHECK(other->languages == 0);
  REQUIRE(report.notes.size() == 1);
  CHECK(report.notes[0].find("only English") != std::string::npos);
}

TEST_CASE("report JSON round trip") {
  auto report = aggregate_report({metric("e1", "en", "bon", "hope", 0.2), metric("d1", "de", "bon", "hope", 0.4),
                                  metric("d2", "de", "bon", "hope", std::nullopt)});
  report.failures.push_back("x9: backend timeout");
  auto j = report_to_json(report);
  auto back = report_from_json(j);
  CHECK(report_to_json(back) == j);
  CHECK(back.failures == report.failures);
  CHECK(back.cells.size() == report.cells.size());
}
