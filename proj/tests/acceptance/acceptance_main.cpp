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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include "../extraction_cases.hpp"
#include "../support.hpp"
#include "polysel/cache.hpp"
#include "polysel/harness.hpp"
#include "polysel/metrics.hpp"
#include "polysel/mock_backends.hpp"
#include "polysel/sampling.hpp"
#include "polysel/selection.hpp"
#include "polysel/synthetic_backends.hpp"

using namespace polysel;
namespace fs = std::filesystem;
namespace pt = polysel::testing;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const std::vector<std::string> kOtherLanguages{"de", "ja", "zh", "fr", "sw"};

// Non-English base quality and noise are chosen so that the greedy answer
// is weaker and sampling is more volatile than in English.
nlohmann::json synthetic_profiles(double english_break = 0.9, double other_break = 0.4) {
  return {{"profiles",
           {{"en", {{"base_quality", 0.6}, {"breakpoint", english_break}, {"decay_rate", 1.0}, {"noise_rate", 0.15}}},
            {"default",
             {{"base_quality", 0.5}, {"breakpoint", other_break}, {"decay_rate", 1.0}, {"noise_rate", 0.3}}}}}};
}

PromptRecord prompt_for(std::size_t i, const std::string& language) {
  return pt::open_prompt("s" + std::to_string(i), language, "Synthetic request number " + std::to_string(i));
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double loss_of(Verdict v) {
  return v == Verdict::FirstWins ? 0.0 : v == Verdict::SecondWins ? 1.0 : 0.5;
}

std::size_t first_min(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------

Result oracle_equivalence() {
  auto start = Clock::now();
  DeterministicRng rng(20261017);
  const Verdict verdicts[] = {Verdict::FirstWins, Verdict::SecondWins, Verdict::Tie};
  const PairMode modes[] = {PairMode::Single, PairMode::BothOrders, PairMode::Ordered};
  auto prompt = pt::open_prompt();
  int mismatches = 0;
  int independent_checks = 0;
  const int trials = 1000;

  for (int t = 0; t < trials; ++t) {
    std::size_t n = 1 + rng.below(8);
    std::size_t m = rng.below(5);
    PairMode mode = modes[rng.below(3)];
    std::vector<std::string> hyps, evidence, all;
    for (std::size_t i = 0; i < n; ++i) hyps.push_back("h" + std::to_string(i));
    for (std::size_t k = 0; k < m; ++k) evidence.push_back("e" + std::to_string(k));
    all = hyps;
    all.insert(all.end(), evidence.begin(), evidence.end());
    std::map<pt::TableJudge::Key, Verdict> table;
    for (const auto& a : all) {
      for (const auto& b : all) {
        if (a != b) table[{a, b}] = verdicts[rng.below(3)];
      }
    }
    pt::TableJudge judge(table);
    auto pool = pt::make_pool(hyps, evidence);
    SelectionOptions options;
    options.pair_mode = mode;
    options.require_evidence = false;

    RiskTable judge_table(0, 0), cross_table(0, 0);
    auto j = select_judge_mbr(judge, prompt, pool, options, &judge_table);
    auto x = select_xmbr(judge, prompt, pool, options, &cross_table);
    if (j.chosen_index != brute_force_mbr_oracle(judge_table.as_matrix())) ++mismatches;
    if (x.chosen_index != brute_force_mbr_oracle(cross_table.as_matrix())) ++mismatches;

    if (mode == PairMode::Single) {
      // Risk straight from the verdict table.
      std::vector<double> in_language(n, 0.0);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          double loss = loss_of(table.at({hyps[a], hyps[b]}));
          in_language[a] += loss;
          in_language[b] += 1.0 - loss;
        }
      }
      auto cross = in_language;
      for (std::size_t a = 0; a < n; ++a) {
        for (const auto& e : evidence) cross[a] += loss_of(table.at({hyps[a], e}));
      }
      if (j.chosen_index != first_min(in_language)) ++mismatches;
      if (x.chosen_index != first_min(cross)) ++mismatches;
      ++independent_checks;
    }
  }
  double elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 5.0,
          fmt("%d trials, %d mismatches (%d also checked against table risk), %.2f s", trials, mismatches,
              independent_checks, elapsed)};
}

Result call_counts() {
  MockGenerator gen(pt::descriptor("mock-gen", BackendKind::Mock, {{"vocab_size", 24}, {"max_length", 16}}));
  MockJudge judge(pt::descriptor("mock-judge", BackendKind::Mock), JudgeTemplates::defaults());
  MockReward reward(pt::descriptor("mock-reward", BackendKind::Mock));
  auto prompt = pt::open_prompt("c2", "de", "Erkläre kurz die Gezeiten.");

  SamplingPlan plan;
  plan.n = 5;
  plan.evidence_m = 3;
  plan.seed = 1;
  CallLedger sampling;
  auto pool = extend_evidence(gen, prompt, assemble_pool(gen, prompt, plan, sampling), plan, sampling);

  SelectionOptions single;
  SelectionOptions ordered;
  ordered.pair_mode = PairMode::Ordered;
  struct Count {
    const char* name;
    std::uint64_t got;
    std::uint64_t want;
  };
  std::vector<Count> counts{
      {"bon reward", select_reward_bon(reward, prompt, pool).ledger.reward_calls, 5},
      {"chops one-pass", select_chops(judge, prompt, pool).ledger.judge_onepass_calls, 1},
      {"judge_mbr single", select_judge_mbr(judge, prompt, pool, single).ledger.judge_pairwise_calls, 10},
      {"xmbr single", select_xmbr(judge, prompt, pool, single).ledger.judge_pairwise_calls, 25},
      {"judge_mbr ordered", select_judge_mbr(judge, prompt, pool, ordered).ledger.judge_pairwise_calls, 20},
      {"xmbr ordered", select_xmbr(judge, prompt, pool, ordered).ledger.judge_pairwise_calls, 40},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : counts) {
    ok = ok && c.got == c.want;
    detail += fmt("%s%s=%llu", detail.empty() ? "" : ", ", c.name, static_cast<unsigned long long>(c.got));
  }
  return {ok, detail};
}

Result hedge_guarantee() {
  SyntheticGenerator gen(pt::descriptor("syn", BackendKind::Synthetic, synthetic_profiles()));
  SyntheticOracleScorer scorer;
  const double temperatures[] = {0.3, 0.7, 1.0, 1.5};
  int negative = 0;
  double lowest = 1e9;
  const int prompts = 1000;
  for (int i = 0; i < prompts; ++i) {
    std::string language = i % 2 == 0 ? "en" : kOtherLanguages[static_cast<std::size_t>(i / 2) % kOtherLanguages.size()];
    auto prompt = prompt_for(static_cast<std::size_t>(i), language);
    SamplingPlan plan;
    plan.seed = static_cast<std::uint64_t>(i) * 7919;
    plan.temperature = temperatures[i % 4];
    CallLedger ledger;
    auto pool = assemble_pool(gen, prompt, plan, ledger);
    auto d = pool_diagnostics(prompt, pool, scorer, pool.hypotheses[*pool.greedy_index()], ledger);
    if (d.hope < 0.0) ++negative;
    lowest = std::min(lowest, d.hope);
  }
  return {negative == 0, fmt("%d prompts, %d with negative hope, minimum hope %.4f", prompts, negative, lowest)};
}

Result temperature_trend() {
  auto start = Clock::now();
  SyntheticGenerator gen(pt::descriptor("syn", BackendKind::Synthetic, synthetic_profiles(0.9, 0.4)));
  SyntheticOracleScorer scorer;
  std::vector<double> hope_en, hope_other, risk_en, risk_other;
  const int prompts = 2000;
  for (int i = 0; i < prompts; ++i) {
    bool english = i % 2 == 0;
    std::string language = english ? "en" : kOtherLanguages[static_cast<std::size_t>(i / 2) % kOtherLanguages.size()];
    auto prompt = prompt_for(static_cast<std::size_t>(i), language);
    SamplingPlan plan;
    plan.temperature = 0.7;
    plan.seed = static_cast<std::uint64_t>(i) * 104729;
    CallLedger ledger;
    auto pool = assemble_pool(gen, prompt, plan, ledger);
    auto d = pool_diagnostics(prompt, pool, scorer, pool.hypotheses[*pool.greedy_index()], ledger);
    (english ? hope_en : hope_other).push_back(d.hope);
    (english ? risk_en : risk_other).push_back(d.risk);
  }
  auto se = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::sqrt(variance_of(a) / static_cast<double>(a.size()) + variance_of(b) / static_cast<double>(b.size()));
  };
  double hope_gap = mean_of(hope_other) - mean_of(hope_en);
  double risk_gap = mean_of(risk_en) - mean_of(risk_other);
  double hope_se = se(hope_other, hope_en);
  double risk_se = se(risk_other, risk_en);
  double elapsed = seconds_since(start);
  bool ok = hope_gap >= 3.0 * hope_se && risk_gap >= 3.0 * risk_se && elapsed < 30.0;
  return {ok, fmt("hope en %.4f vs other %.4f (gap %.1f SE); risk en %.4f vs other %.4f (gap %.1f SE); %.2f s",
                  mean_of(hope_en), mean_of(hope_other), hope_gap / hope_se, mean_of(risk_en), mean_of(risk_other),
                  risk_gap / risk_se, elapsed)};
}

Result perfect_judge_dominance() {
  SyntheticGenerator gen(pt::descriptor("syn", BackendKind::Synthetic, synthetic_profiles()));
  SyntheticJudge judge(pt::descriptor("oracle-judge", BackendKind::Synthetic, {{"noise", 0.0}}),
                       JudgeTemplates::defaults());
  SyntheticReward reward(pt::descriptor("oracle-reward", BackendKind::Synthetic, {{"noise", 0.0}}));
  SelectionBackends backends{&judge, &reward};
  const std::vector<Strategy> guaranteed{Strategy::RewardBoN, Strategy::JudgeMBR, Strategy::XMBR, Strategy::CHOPS};
  const std::vector<Strategy> all{Strategy::SimMBR, Strategy::RewardBoN, Strategy::JudgeMBR, Strategy::XMBR,
                                  Strategy::CHOPS};
  std::map<Strategy, std::vector<WinRecord>> records;
  std::vector<WinRecord> baseline;
  std::map<Strategy, int> losses;
  const int pools = 500;
  for (int i = 0; i < pools; ++i) {
    std::string language = i % 2 == 0 ? "en" : kOtherLanguages[static_cast<std::size_t>(i / 2) % kOtherLanguages.size()];
    auto prompt = prompt_for(static_cast<std::size_t>(i), language);
    SamplingPlan plan;
    plan.seed = static_cast<std::uint64_t>(i) * 31337;
    CallLedger ledger;
    auto pool = extend_evidence(gen, prompt, assemble_pool(gen, prompt, plan, ledger), plan, ledger);
    const Sample& greedy = pool.hypotheses[*pool.greedy_index()];
    baseline.push_back({prompt.id, Outcome::Tie});
    for (auto s : all) {
      const Sample& chosen = pool.hypotheses[select(s, backends, prompt, pool).chosen_index];
      Outcome o = chosen.text == greedy.text
                      ? Outcome::Tie
                      : outcome_from_verdict(judge.pairwise(prompt, chosen, greedy, PairKind::InLanguage, ledger).verdict);
      if (o == Outcome::Loss) ++losses[s];
      records[s].push_back({prompt.id, o});
    }
  }
  bool ok = true;
  std::string detail = fmt("%d pools;", pools);
  for (auto s : all) {
    double delta = win_rate_delta(records[s], baseline);
    bool required = std::find(guaranteed.begin(), guaranteed.end(), s) != guaranteed.end();
    if (required) ok = ok && delta >= 0.0 && losses[s] == 0;
    detail += fmt(" %s delta %+.3f (%d losses%s)", std::string(to_string(s)).c_str(), delta, losses[s],
                  required ? "" : ", informational");
  }
  return {ok, detail};
}

Result xmbr_reduction() {
  SyntheticGenerator gen(pt::descriptor("syn", BackendKind::Synthetic, synthetic_profiles()));
  auto noisy = std::make_shared<SyntheticJudge>(
      pt::descriptor("noisy-judge", BackendKind::Synthetic, {{"noise", 0.3}, {"seed", 9}}), JudgeTemplates::defaults());
  CachedJudge judge(noisy, CallPolicy{std::make_shared<ResponseCache>(), nullptr});
  int mismatches = 0;
  std::uint64_t fresh_calls = 0;
  std::uint64_t self_pairs = 0;
  const int pools = 200;
  const PairMode modes[] = {PairMode::Single, PairMode::BothOrders, PairMode::Ordered};
  for (int i = 0; i < pools; ++i) {
    auto prompt = prompt_for(static_cast<std::size_t>(i), i % 3 == 0 ? "en" : "ja");
    SamplingPlan plan;
    plan.seed = static_cast<std::uint64_t>(i) + 1;
    plan.n = 2 + i % 7;
    plan.temperature = 1.0;
    CallLedger ledger;
    auto pool = assemble_pool(gen, prompt, plan, ledger);
    SelectionOptions options;
    options.pair_mode = modes[i % 3];
    options.require_evidence = false;
    // Judge MBR fills the transcript; X-MBR must replay it.
    auto reference = select_judge_mbr(judge, prompt, pool, options);
    auto replay = select_xmbr(judge, prompt, pool, options);
    fresh_calls += replay.ledger.live_calls();
    // Ordered X-MBR also compares each hypothesis with itself.
    if (options.pair_mode == PairMode::Ordered) self_pairs += pool.hypotheses.size();
    if (replay.chosen_index != reference.chosen_index) ++mismatches;
  }
  return {mismatches == 0 && fresh_calls == self_pairs,
          fmt("%d pools, %d mismatches, %llu judge calls outside the transcript (%llu ordered self-comparisons)",
              pools, mismatches, static_cast<unsigned long long>(fresh_calls),
              static_cast<unsigned long long>(self_pairs))};
}

Result min_p_support() {
  MockGenerator gen(pt::descriptor("mock-gen", BackendKind::Mock, {{"vocab_size", 24}}));
  DeterministicRng rng(77);
  const double temperatures[] = {0.3, 0.7, 1.0, 1.5};
  const double min_p = 0.2;
  const int draws = 100'000;
  int violations = 0;
  int with_pruning = 0;
  for (int d = 0; d < draws; ++d) {
    auto logits = gen.logits(mix64(static_cast<std::uint64_t>(d / 16)), static_cast<std::size_t>(d % 16), rng.below(24));
    double tau = temperatures[d % 4];
    DecodeParams params{tau, min_p, 64, static_cast<std::uint64_t>(d)};
    std::size_t token = mock_next_token(logits, params, rng);

    double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs;
    double total = 0.0;
    for (double l : logits) {
      probs.push_back(std::exp((l - top) / tau));
      total += probs.back();
    }
    for (double& p : probs) p /= total;
    double max_p = *std::max_element(probs.begin(), probs.end());
    if (probs[token] < min_p * max_p) ++violations;
    if (std::any_of(probs.begin(), probs.end(), [&](double p) { return p < min_p * max_p; })) ++with_pruning;
  }
  return {violations == 0,
          fmt("%d draws, %d below threshold, %d draws had prunable tokens", draws, violations, with_pruning)};
}

Result shingle_golden() {
  struct Pair {
    const char* a;
    const char* b;
    double want;
  };
  const std::vector<Pair> pairs{{"a b c", "a b c", 1.0}, {"a b c d", "b c d e", 0.5}, {"a b", "c d", 0.0},
                                {"", "", 1.0},           {"a b", "", 0.0}};
  int failures = 0;
  for (const auto& p : pairs) {
    if (shingle_similarity(p.a, p.b) != p.want) ++failures;
  }
  RiskTable table(0, 0);
  auto dup = select_sim_mbr(pt::make_pool({"a b c", "a b c", "x y z"}), &table);
  if (dup.chosen_index != 0 || table.risk() != std::vector<double>{1.0, 1.0, 2.0}) ++failures;
  if (select_sim_mbr(pt::make_pool({"x y", "x y", "x y"})).chosen_index != 0) ++failures;
  if (select_sim_mbr(pt::make_pool({"only one"})).chosen_index != 0) ++failures;
  return {failures == 0, fmt("%zu similarity and 3 selection cases, %d failures", pairs.size(), failures)};
}

// -- determinism and resume --------------------------------------------------

fs::path write_resume_dataset(const fs::path& dir) {
  const std::vector<std::string> languages{"en", "de", "ja", "zh"};
  std::string body;
  for (int i = 0; i < 16; ++i) {
    nlohmann::json line = {{"id", "r" + std::to_string(i)},
                           {"language", languages[static_cast<std::size_t>(i) % languages.size()]},
                           {"task", "open_ended"},
                           {"prompt", "Resume test prompt " + std::to_string(i)}};
    body += line.dump() + '\n';
  }
  pt::write_file(dir / "prompts.jsonl", body);
  return dir / "prompts.jsonl";
}

RunConfig resume_config(const fs::path& dataset, const fs::path& dir, int latency_ms) {
  nlohmann::json j = {
      {"run_id", "r"},
      {"dataset", dataset.string()},
      {"output_dir", (dir / "runs").string()},
      {"cache_dir", (dir / "cache").string()},
      {"seed", 5},
      {"concurrency", 2},
      {"backends",
       {{"generator", {{"id", "g"}, {"kind", "mock"}, {"options", {{"latency_ms", latency_ms}}}}},
        {"judge", {{"id", "j"}, {"kind", "mock"}}},
        {"reward", {{"id", "w"}, {"kind", "mock"}}}}},
      {"scorer", {{"kind", "reward"}}},
      {"strategies", {"likelihood", "sim_mbr", "reward_bon", "judge_mbr", "xmbr", "chops"}}};
  return config_from_json(j);
}

std::size_t scored_in(const fs::path& ledger_path) {
  std::size_t n = 0;
  try {
    auto ledger = RunLedger::load(ledger_path);
    for (const auto& [id, state] : ledger.prompts()) {
      if (state.status == PromptStatus::Scored) ++n;
    }
  } catch (const std::exception&) {
  }
  return n;
}

Result determinism_and_resume() {
  auto root = pt::scratch_dir("acceptance-resume");
  auto dataset = write_resume_dataset(root);

  auto clean_a = resume_config(dataset, root / "a", 0);
  auto clean_b = resume_config(dataset, root / "b", 0);
  auto summary_a = run(clean_a);
  run(clean_b);
  std::string csv_a = pt::read_file(clean_a.run_dir() / "report.csv");
  bool identical = summary_a.completed == 16 && csv_a == pt::read_file(clean_b.run_dir() / "report.csv");
  std::uint64_t clean_calls = summary_a.ledger.total().live_calls();

  auto killed = resume_config(dataset, root / "k", 20);
  auto ledger_path = killed.run_dir() / "ledger.json";
  pid_t child = fork();
  if (child < 0) return {false, "fork failed"};
  if (child == 0) {
    try {
      run(killed);
    } catch (...) {
    }
    _exit(0);
  }
  auto deadline = Clock::now() + std::chrono::seconds(120);
  while (scored_in(ledger_path) < 8 && Clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  kill(child, SIGKILL);
  int status = 0;
  waitpid(child, &status, 0);
  bool was_killed = WIFSIGNALED(status);

  auto at_kill = RunLedger::load(ledger_path);
  std::size_t scored_at_kill = 0;
  std::set<std::string> finished;
  for (const auto& [id, state] : at_kill.prompts()) {
    if (state.status == PromptStatus::Scored) finished.insert(id);
  }
  scored_at_kill = finished.size();
  auto cache_file = root / "k" / "cache" / "responses.jsonl";
  std::size_t records_at_kill = ResponseCache(cache_file).size();

  auto resumed = run(killed);
  std::uint64_t resumed_calls = 0;
  for (const auto& [id, state] : resumed.ledger.prompts()) {
    if (!finished.count(id)) resumed_calls += state.ledger.live_calls();
  }
  std::uint64_t total_calls = resumed.ledger.total().live_calls();

  std::set<std::string> keys;
  auto lines = pt::read_lines(cache_file);
  for (const auto& line : lines) keys.insert(nlohmann::json::parse(line).at("key").get<std::string>());
  bool unique_keys = keys.size() == lines.size();
  bool same_csv = pt::read_file(killed.run_dir() / "report.csv") == csv_a;

  bool ok = identical && was_killed && scored_at_kill < 16 && resumed.completed == 16 - scored_at_kill &&
            total_calls == clean_calls && resumed_calls == clean_calls - records_at_kill && unique_keys && same_csv;
  return {ok, fmt("clean CSVs identical: %s; killed with %zu/16 scored and %zu cached calls; resume made %llu live "
                  "calls (clean run %llu, expected %llu); ledger total %llu; duplicate cache keys %zu; resumed CSV "
                  "matches: %s",
                  identical ? "yes" : "no", scored_at_kill, records_at_kill,
                  static_cast<unsigned long long>(resumed_calls), static_cast<unsigned long long>(clean_calls),
                  static_cast<unsigned long long>(clean_calls - records_at_kill),
                  static_cast<unsigned long long>(total_calls), lines.size() - keys.size(),
                  same_csv ? "yes" : "no")};
}

Result extraction_suite() {
  const auto& cases = pt::extraction_cases();
  int failures = 0;
  bool comma = false, currency = false, period = false, empty = false;
  for (const auto& c : cases) {
    auto got = extract_final_answer(c.text);
    int match = exact_match(got, c.gold);
    if (got != c.extracted || match != (c.extracted.empty() ? 0 : 1)) {
      ++failures;
      std::fprintf(stderr, "  extraction mismatch: \"%s\" -> \"%s\"\n", c.text.c_str(), got.c_str());
    }
    comma = comma || c.text.find(',') != std::string::npos;
    currency = currency || c.text.find('$') != std::string::npos;
    period = period || (!c.text.empty() && c.text.back() == '.' && !c.extracted.empty());
    empty = empty || c.extracted.empty();
  }
  bool covered = comma && currency && period && empty;
  return {failures == 0 && cases.size() >= 20 && covered,
          fmt("%zu cases, %d failures, categories covered: %s", cases.size(), failures, covered ? "yes" : "no")};
}

Result scaling_prefix() {
  auto root = pt::scratch_dir("acceptance-scan");
  const std::vector<int> sizes{1, 3, 5, 10};

  nlohmann::json mock = {
      {"run_id", "scan-mock"},
      {"dataset", (fs::path(POLYSEL_SOURCE_DIR) / "examples_data" / "prompts.jsonl").string()},
      {"output_dir", (root / "runs").string()},
      {"seed", 3},
      {"backends", {{"generator", {{"id", "g"}, {"kind", "mock"}}}, {"reward", {{"id", "w"}, {"kind", "mock"}}}}},
      {"scorer", {{"math", {{"kind", "exact_match"}}}, {"default", {{"kind", "reward"}}}}},
      {"strategies", {"sim_mbr"}}};
  auto mock_table = scan_pool_sizes(config_from_json(mock), sizes);
  int prefix_failures = 0;
  std::size_t mock_prompts = mock_table.pools[10].size();
  for (std::size_t i = 0; i < mock_prompts; ++i) {
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      const auto& small = mock_table.pools[sizes[k]][i].hypotheses;
      const auto& large = mock_table.pools[sizes[k + 1]][i].hypotheses;
      if (small.size() != static_cast<std::size_t>(sizes[k]) || !std::equal(small.begin(), small.end(), large.begin())) {
        ++prefix_failures;
      }
    }
  }

  std::string body;
  for (int i = 0; i < 500; ++i) {
    std::string language = i % 2 == 0 ? "en" : kOtherLanguages[static_cast<std::size_t>(i / 2) % kOtherLanguages.size()];
    body += nlohmann::json{{"id", "s" + std::to_string(i)},
                           {"language", language},
                           {"task", "open_ended"},
                           {"prompt", "Scaling prompt " + std::to_string(i)}}
                .dump() +
            '\n';
  }
  pt::write_file(root / "synthetic.jsonl", body);
  nlohmann::json synthetic = {
      {"run_id", "scan-synthetic"},
      {"dataset", (root / "synthetic.jsonl").string()},
      {"output_dir", (root / "runs").string()},
      {"seed", 4},
      {"backends",
       {{"generator", {{"id", "g"}, {"kind", "synthetic"}, {"options", synthetic_profiles()}}},
        {"reward", {{"id", "w"}, {"kind", "synthetic"}}}}},
      {"scorer", {{"kind", "synthetic_oracle"}}},
      {"strategies", {"reward_bon"}}};
  auto syn_table = scan_pool_sizes(config_from_json(synthetic), sizes);
  std::vector<double> best;
  for (const auto& row : syn_table.rows) {
    if (row.metric == "best_of_pool") best.push_back(row.value);
  }
  bool monotone = best.size() == sizes.size() && std::is_sorted(best.begin(), best.end());
  int per_prompt_drops = 0;
  std::size_t syn_prompts = syn_table.pools[10].size();
  for (std::size_t i = 0; i < syn_prompts; ++i) {
    double previous = -1.0;
    for (int n : sizes) {
      double q = 0.0;
      for (const auto& s : syn_table.pools[n][i].hypotheses) q = std::max(q, require_synthetic_quality(s.text));
      if (q < previous) ++per_prompt_drops;
      previous = q;
    }
  }
  std::string curve;
  for (double b : best) curve += fmt("%s%.4f", curve.empty() ? "" : " ", b);
  bool ok = prefix_failures == 0 && mock_prompts == 8 && mock_table.failures.empty() && monotone &&
            per_prompt_drops == 0 && syn_prompts == 500;
  return {ok, fmt("mock: %zu prompts, %d prefix failures; synthetic: %zu prompts, best-of-pool %s, %d per-prompt drops",
                  mock_prompts, prefix_failures, syn_prompts, curve.c_str(), per_prompt_drops)};
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  struct Criterion {
    int number;
    const char* name;
    std::function<Result()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "MBR oracle equivalence", oracle_equivalence},
      {2, "call-count exactness", call_counts},
      {3, "hedge guarantee", hedge_guarantee},
      {4, "temperature trend", temperature_trend},
      {5, "perfect-judge dominance", perfect_judge_dominance},
      {6, "X-MBR reduction", xmbr_reduction},
      {7, "min-p support", min_p_support},
      {8, "shingle golden suite", shingle_golden},
      {9, "determinism and resume", determinism_and_resume},
      {10, "final-answer extraction", extraction_suite},
      {11, "scaling prefix", scaling_prefix},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.number)) continue;
    ++ran;
    Result r;
    try {
      r = c.check();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failed;
    std::printf("%s  %2d  %-26s %s\n", r.pass ? "PASS" : "FAIL", c.number, c.name, r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", ran - static_cast<std::size_t>(failed), ran);
  return failed == 0 ? 0 : 1;
}
