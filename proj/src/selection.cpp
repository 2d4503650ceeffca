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

#include "polysel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <string>

#include "polysel/util.hpp"

namespace polysel {
namespace {

std::set<std::pair<std::string, std::string>> bigrams(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  std::set<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.emplace(tokens[i], tokens[i + 1]);
  return out;
}

struct JudgeJob {
  const Sample* candidate;
  const Sample* reference;
  PairKind kind;
  std::string label;
};

// Runs all jobs (up to `parallelism` at once) and returns verdicts in job
// order. Every job's calls reach `ledger`, including failed ones.
std::vector<Verdict> judge_all(JudgeBackend& judge, const PromptRecord& prompt, const std::vector<JudgeJob>& jobs,
                               std::size_t parallelism, CallLedger& ledger) {
  std::vector<Verdict> verdicts(jobs.size(), Verdict::Tie);
  std::vector<CallLedger> ledgers(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  parallel_for(jobs.size(), parallelism, [&](std::size_t k) {
    try {
      const auto& job = jobs[k];
      verdicts[k] = judge.pairwise(prompt, *job.candidate, *job.reference, job.kind, ledgers[k]).verdict;
    } catch (const Error& e) {
      errors[k] = std::make_exception_ptr(Error(e.code(), jobs[k].label + ": " + e.detail()));
    } catch (...) {
      errors[k] = std::current_exception();
    }
  });
  for (const auto& l : ledgers) ledger += l;
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return verdicts;
}

std::string pair_label(std::string_view what, std::size_t i, std::size_t j) {
  return std::string(what) + " (" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

Verdict combine_orders(Verdict forward, Verdict backward) {
  Verdict mirrored = mirror(backward);
  return forward == mirrored ? forward : Verdict::Tie;
}

// One planned comparison and where its loss goes.
struct Cell {
  std::size_t hypothesis;
  std::size_t column;
  bool also_reverse;  // record the complement at (column, hypothesis)
};

// Judges candidate-vs-evidence cells under `mode` and records the losses.
void judge_cells(JudgeBackend& judge, const PromptRecord& prompt, const std::vector<const Sample*>& columns,
                 const SamplePool& pool, const std::vector<Cell>& cells, PairKind kind, PairMode mode,
                 std::size_t parallelism, RiskTable& table, CallLedger& ledger) {
  std::vector<JudgeJob> jobs;
  std::string_view what = kind == PairKind::InLanguage ? "pair" : "cross-lingual pair";
  for (const auto& c : cells) {
    const Sample* cand = &pool.hypotheses[c.hypothesis];
    const Sample* ref = columns[c.column];
    jobs.push_back({cand, ref, kind, pair_label(what, c.hypothesis, c.column)});
    if (mode == PairMode::BothOrders) {
      jobs.push_back({ref, cand, kind, pair_label(what, c.column, c.hypothesis) + " reversed"});
    }
  }
  auto verdicts = judge_all(judge, prompt, jobs, parallelism, ledger);
  std::size_t stride = mode == PairMode::BothOrders ? 2 : 1;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    Verdict v = verdicts[k * stride];
    if (mode == PairMode::BothOrders) v = combine_orders(v, verdicts[k * stride + 1]);
    auto loss = PairwiseLoss::from_verdict(v);
    table.record(cells[k].hypothesis, cells[k].column, loss);
    if (cells[k].also_reverse) table.record(cells[k].column, cells[k].hypothesis, loss.complement());
  }
}

// In-language cells for hypotheses against the pool's evidence subset.
std::vector<Cell> in_language_cells(const SamplePool& pool, PairMode mode, bool include_self) {
  std::size_t n = pool.hypotheses.size();
  auto evidence = pool.evidence_indices();
  std::vector<bool> is_evidence(n, false);
  for (auto e : evidence) is_evidence[e] = true;

  std::vector<Cell> cells;
  if (mode == PairMode::Ordered) {
    for (std::size_t i = 0; i < n; ++i) {
      for (auto j : evidence) {
        if (i != j || include_self) cells.push_back({i, j, false});
      }
    }
    return cells;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (is_evidence[j]) {
        cells.push_back({i, j, is_evidence[i]});
      } else if (is_evidence[i]) {
        cells.push_back({j, i, false});
      }
    }
  }
  return cells;
}

SelectionOutcome from_risk(Strategy strategy, const RiskTable& table, CallLedger ledger) {
  SelectionOutcome out;
  out.strategy = strategy;
  out.chosen_index = table.best();
  out.per_candidate_score.reserve(table.risk().size());
  for (double r : table.risk()) out.per_candidate_score.push_back(-r);
  out.ledger = ledger;
  return out;
}

void require_hypotheses(const SamplePool& pool) {
  if (pool.hypotheses.empty()) throw Error(ErrorCode::InvalidConfig, pool.prompt_id + ": pool has no hypotheses");
}

}  // namespace

std::string_view to_string(PairMode mode) {
  switch (mode) {
    case PairMode::Single: return "single";
    case PairMode::BothOrders: return "both_orders";
    case PairMode::Ordered: return "ordered";
  }
  return "single";
}

PairMode parse_pair_mode(std::string_view name) {
  for (auto m : {PairMode::Single, PairMode::BothOrders, PairMode::Ordered}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown pair mode '" + std::string(name) + "'");
}

PairwiseLoss::PairwiseLoss(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw Error(ErrorCode::InvalidParams, "pairwise loss outside [0, 1]");
}

PairwiseLoss PairwiseLoss::from_verdict(Verdict v) {
  switch (v) {
    case Verdict::FirstWins: return PairwiseLoss(0.0);
    case Verdict::SecondWins: return PairwiseLoss(1.0);
    case Verdict::Tie: return PairwiseLoss(0.5);
  }
  return PairwiseLoss(0.5);
}

PairwiseLoss PairwiseLoss::from_similarity(double similarity) { return PairwiseLoss(1.0 - similarity); }

RiskTable::RiskTable(std::size_t hypotheses, std::size_t columns) : columns_(columns), risk_(hypotheses, 0.0) {}

void RiskTable::record(std::size_t hypothesis, std::size_t column, PairwiseLoss loss) {
  if (hypothesis >= risk_.size() || column >= columns_) {
    throw Error(ErrorCode::InvalidParams, "risk cell out of range");
  }
  if (!cache_.emplace(std::pair(hypothesis, column), loss).second) {
    throw Error(ErrorCode::InvalidParams,
                "risk cell (" + std::to_string(hypothesis) + ", " + std::to_string(column) + ") recorded twice");
  }
  risk_[hypothesis] += loss.value();
}

std::vector<double> RiskTable::recompute() const {
  std::vector<double> out(risk_.size(), 0.0);
  for (const auto& [cell, loss] : cache_) out[cell.first] += loss.value();
  return out;
}

std::vector<std::vector<double>> RiskTable::as_matrix() const {
  std::vector<std::vector<double>> m(risk_.size(), std::vector<double>(columns_, 0.0));
  for (const auto& [cell, loss] : cache_) m[cell.first][cell.second] = loss.value();
  return m;
}

double shingle_similarity(std::string_view a, std::string_view b) {
  auto sa = bigrams(a);
  auto sb = bigrams(b);
  if (sa.empty() && sb.empty()) return 1.0;
  if (sa.empty() || sb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& g : sa) common += sb.count(g);
  return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

std::size_t brute_force_mbr_oracle(const std::vector<std::vector<double>>& losses) {
  if (losses.empty() || losses.front().empty()) throw Error(ErrorCode::EmptyMatrix, "loss matrix is empty");
  std::size_t columns = losses.front().size();
  std::vector<double> sums;
  for (const auto& row : losses) {
    if (row.size() != columns) throw Error(ErrorCode::InvalidParams, "loss matrix is not rectangular");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidParams, "loss outside [0, 1]");
      sum += v;
    }
    sums.push_back(sum);
  }
  return first_argmin(sums);
}

SelectionOutcome select_likelihood(const SamplePool& pool, const SelectionOptions& options) {
  require_hypotheses(pool);
  SelectionOutcome out;
  out.strategy = Strategy::Likelihood;
  for (std::size_t i = 0; i < pool.hypotheses.size(); ++i) {
    const auto& lp = pool.hypotheses[i].token_logprobs;
    if (!lp) {
      throw Error(ErrorCode::MissingLogprobs, pool.prompt_id + ": hypothesis " + std::to_string(i) + " has no logprobs");
    }
    double sum = 0.0;
    for (double v : *lp) sum += v;
    if (options.length_normalize && !lp->empty()) sum /= static_cast<double>(lp->size());
    out.per_candidate_score.push_back(sum);
  }
  out.chosen_index = first_argmax(out.per_candidate_score);
  return out;
}

SelectionOutcome select_sim_mbr(const SamplePool& pool, RiskTable* table) {
  require_hypotheses(pool);
  std::size_t n = pool.hypotheses.size();
  RiskTable risk(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : pool.evidence_indices()) {
      if (i == j) continue;
      risk.record(i, j, PairwiseLoss::from_similarity(shingle_similarity(pool.hypotheses[i].text, pool.hypotheses[j].text)));
    }
  }
  auto out = from_risk(Strategy::SimMBR, risk, {});
  if (table != nullptr) *table = std::move(risk);
  return out;
}

SelectionOutcome select_reward_bon(RewardBackend& reward, const PromptRecord& prompt, const SamplePool& pool,
                                   const SelectionOptions& options) {
  require_hypotheses(pool);
  std::size_t n = pool.hypotheses.size();
  std::vector<double> scores(n, 0.0);
  std::vector<CallLedger> ledgers(n);
  std::vector<std::exception_ptr> errors(n);
  parallel_for(n, options.parallelism, [&](std::size_t i) {
    try {
      scores[i] = reward.score(prompt, pool.hypotheses[i], ledgers[i]);
      if (!std::isfinite(scores[i])) throw Error(ErrorCode::MalformedResponse, "reward is not finite");
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  SelectionOutcome out;
  out.strategy = Strategy::RewardBoN;
  for (const auto& l : ledgers) out.ledger += l;
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  out.per_candidate_score = std::move(scores);
  out.chosen_index = first_argmax(out.per_candidate_score);
  return out;
}

SelectionOutcome select_judge_mbr(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                                  const SelectionOptions& options, RiskTable* table) {
  require_hypotheses(pool);
  std::size_t n = pool.hypotheses.size();
  std::vector<const Sample*> columns;
  for (const auto& h : pool.hypotheses) columns.push_back(&h);

  RiskTable risk(n, n);
  CallLedger ledger;
  judge_cells(judge, prompt, columns, pool, in_language_cells(pool, options.pair_mode, false), PairKind::InLanguage,
              options.pair_mode, options.parallelism, risk, ledger);
  auto out = from_risk(Strategy::JudgeMBR, risk, ledger);
  if (table != nullptr) *table = std::move(risk);
  return out;
}

SelectionOutcome select_xmbr(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                             const SelectionOptions& options, RiskTable* table) {
  require_hypotheses(pool);
  if (pool.cross_lingual_evidence.empty() && options.require_evidence) {
    throw Error(ErrorCode::EmptyEvidence, pool.prompt_id + ": no cross-lingual evidence");
  }
  std::size_t n = pool.hypotheses.size();
  std::size_t m = pool.cross_lingual_evidence.size();
  std::vector<const Sample*> columns;
  for (const auto& h : pool.hypotheses) columns.push_back(&h);
  for (const auto& e : pool.cross_lingual_evidence) columns.push_back(&e);

  RiskTable risk(n, n + m);
  CallLedger ledger;
  bool ordered = options.pair_mode == PairMode::Ordered;
  judge_cells(judge, prompt, columns, pool, in_language_cells(pool, options.pair_mode, ordered), PairKind::InLanguage,
              options.pair_mode, options.parallelism, risk, ledger);

  std::vector<Cell> cross;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) cross.push_back({i, n + k, false});
  }
  judge_cells(judge, prompt, columns, pool, cross, PairKind::CrossLingual, options.pair_mode, options.parallelism,
              risk, ledger);
  auto out = from_risk(Strategy::XMBR, risk, ledger);
  if (table != nullptr) *table = std::move(risk);
  return out;
}

SelectionOutcome select_chops(JudgeBackend& judge, const PromptRecord& prompt, const SamplePool& pool,
                              const SelectionOptions& options) {
  require_hypotheses(pool);
  std::size_t n = pool.hypotheses.size();
  SelectionOutcome out;
  out.strategy = Strategy::CHOPS;
  out.per_candidate_score.assign(n, 0.0);
  if (n == 1) {
    out.per_candidate_score[0] = 1.0;
    return out;
  }

  std::size_t chars = prompt.text.size();
  for (const auto& h : pool.hypotheses) chars += h.text.size();
  std::size_t estimated = (chars + 3) / 4;
  if (estimated > options.context_budget_tokens) {
    throw Error(ErrorCode::ContextOverflow, pool.prompt_id + ": about " + std::to_string(estimated) +
                                               " tokens exceed the budget of " +
                                               std::to_string(options.context_budget_tokens));
  }
  auto verdict = judge.one_pass(prompt, pool.hypotheses, options.checklist, out.ledger);
  if (verdict.chosen_index >= n) {
    throw Error(ErrorCode::IndexOutOfRange, pool.prompt_id + ": judge chose candidate " +
                                                std::to_string(verdict.chosen_index + 1) + " of " + std::to_string(n));
  }
  out.chosen_index = verdict.chosen_index;
  out.per_candidate_score[verdict.chosen_index] = 1.0;
  out.rationale = std::move(verdict.rationale);
  return out;
}

SelectionOutcome select(Strategy strategy, const SelectionBackends& backends, const PromptRecord& prompt,
                        const SamplePool& pool, const SelectionOptions& options) {
  auto need_judge = [&]() -> JudgeBackend& {
    if (backends.judge == nullptr) throw Error(ErrorCode::InvalidConfig, std::string(to_string(strategy)) + " needs a judge");
    return *backends.judge;
  };
  switch (strategy) {
    case Strategy::Likelihood: return select_likelihood(pool, options);
    case Strategy::SimMBR: return select_sim_mbr(pool);
    case Strategy::RewardBoN:
      if (backends.reward == nullptr) throw Error(ErrorCode::InvalidConfig, "reward_bon needs a reward backend");
      return select_reward_bon(*backends.reward, prompt, pool, options);
    case Strategy::JudgeMBR: return select_judge_mbr(need_judge(), prompt, pool, options);
    case Strategy::XMBR: return select_xmbr(need_judge(), prompt, pool, options);
    case Strategy::CHOPS: return select_chops(need_judge(), prompt, pool, options);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown strategy");
}

}  // namespace polysel
