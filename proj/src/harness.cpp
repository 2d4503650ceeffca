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

#include "polysel/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>

#include "polysel/cache.hpp"
#include "polysel/serialize.hpp"
#include "polysel/util.hpp"

namespace polysel {
namespace fs = std::filesystem;

namespace {

constexpr const char* kResults = "results.jsonl";
constexpr const char* kPools = "pools.jsonl";
constexpr const char* kLedger = "ledger.json";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

void append_line(const fs::path& path, const std::string& line) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (f == nullptr) throw Error(ErrorCode::IoError, "cannot append to " + path.string());
  std::string data = line + '\n';
  bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size();
  ok = std::fflush(f) == 0 && ok;
  std::fclose(f);
  if (!ok) throw Error(ErrorCode::IoError, "failed to append to " + path.string());
}

// JSON lines of a file; an unparsable final line (torn write) is dropped.
std::vector<nlohmann::json> read_json_lines(const fs::path& path) {
  std::vector<nlohmann::json> out;
  if (!fs::exists(path)) return out;
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      out.push_back(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::exception& e) {
      if (i + 1 == lines.size()) break;
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::string error_text(const std::exception& e) { return e.what(); }

Sample external_sample(const std::string& text, const LanguageTag& language) {
  Sample s;
  s.text = text;
  s.language = language;
  s.provenance = Provenance::Stochastic;
  return s;
}

bool needs_judge(Strategy s) { return s == Strategy::JudgeMBR || s == Strategy::XMBR || s == Strategy::CHOPS; }

// Backends and scorers wired for one run.
struct Runtime {
  JudgeTemplates templates;
  std::shared_ptr<ResponseCache> cache;
  std::shared_ptr<CallGate> global;
  std::shared_ptr<GenerationBackend> generator;
  BackendKind generator_kind = BackendKind::Mock;
  std::shared_ptr<JudgeBackend> judge;
  std::shared_ptr<JudgeBackend> eval_judge;
  std::shared_ptr<RewardBackend> reward;
  std::map<TaskKind, std::shared_ptr<QualityScorer>> scorers;
  std::map<std::string, std::string> external;

  QualityScorer& scorer_for(TaskKind task) const {
    auto it = scorers.find(task);
    if (it == scorers.end()) throw Error(ErrorCode::ConfigError, "no scorer for task " + std::string(to_string(task)));
    return *it->second;
  }
};

CallPolicy policy_for(const Runtime& rt, const BackendDescriptor& d) {
  return {rt.cache, std::make_shared<CallGate>(d.max_concurrency, rt.global)};
}

std::optional<nlohmann::json> scorer_spec(const RunConfig& config, const Runtime& rt, TaskKind task) {
  const auto& s = config.scorer;
  if (s.is_object() && s.contains("kind")) return std::optional<nlohmann::json>(std::in_place, s);
  if (s.is_object()) {
    for (const auto& [key, spec] : s.items()) {
      if (key != "default" && parse_task_kind(key) == task) return std::optional<nlohmann::json>(std::in_place, spec);
    }
    if (s.contains("default")) return std::optional<nlohmann::json>(std::in_place, s["default"]);
  }
  if (task == TaskKind::MathReasoning) return nlohmann::json{{"kind", "exact_match"}};
  if (rt.reward) return nlohmann::json{{"kind", "reward"}};
  if (rt.generator_kind == BackendKind::Synthetic) return nlohmann::json{{"kind", "synthetic_oracle"}};
  return std::nullopt;
}

Runtime build_runtime(const RunConfig& config, const std::vector<PromptRecord>& prompts) {
  Runtime rt;
  try {
    rt.templates = config.templates_dir.empty() ? JudgeTemplates::defaults() : JudgeTemplates::load(config.templates_dir);
    rt.cache = config.cache_dir.empty() ? std::make_shared<ResponseCache>()
                                        : std::make_shared<ResponseCache>(config.cache_dir / "responses.jsonl");
    rt.global = std::make_shared<CallGate>(config.concurrency);

    const auto& gen = config.backends.at("generator");
    rt.generator_kind = gen.kind;
    rt.generator = std::make_shared<CachedGenerator>(make_generation_backend(gen, rt.templates), policy_for(rt, gen));
    if (auto it = config.backends.find("judge"); it != config.backends.end()) {
      rt.judge = std::make_shared<CachedJudge>(make_judge_backend(it->second, rt.templates), policy_for(rt, it->second));
    }
    if (auto it = config.backends.find("eval_judge"); it != config.backends.end()) {
      rt.eval_judge =
          std::make_shared<CachedJudge>(make_judge_backend(it->second, rt.templates), policy_for(rt, it->second));
    } else {
      rt.eval_judge = rt.judge;
    }
    if (auto it = config.backends.find("reward"); it != config.backends.end()) {
      rt.reward = std::make_shared<CachedReward>(make_reward_backend(it->second), policy_for(rt, it->second));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CacheCorrupt || e.code() == ErrorCode::IoError) throw;
    throw Error(ErrorCode::ConfigError, e.detail());
  }

  bool wants_likelihood = std::find(config.strategies.begin(), config.strategies.end(), Strategy::Likelihood) !=
                          config.strategies.end();
  if (wants_likelihood && !rt.generator->provides_logprobs()) {
    throw Error(ErrorCode::ConfigError, "likelihood selection needs a generator that reports logprobs");
  }

  std::set<TaskKind> tasks;
  for (const auto& p : prompts) tasks.insert(p.task);
  for (auto task : tasks) {
    auto spec = scorer_spec(config, rt, task);
    if (!spec) throw Error(ErrorCode::ConfigError, "no scorer configured for task " + std::string(to_string(task)));
    try {
      rt.scorers[task] = make_scorer(*spec, rt.reward);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, e.detail());
    }
  }

  if (config.baseline.kind == BaselineKind::ExternalModel) {
    for (const auto& line : read_json_lines(config.baseline.path)) {
      try {
        std::string id = line.at("id").get<std::string>();
        rt.external[id] = line.contains("text") ? line["text"].get<std::string>() : line.at("response").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, "baseline file: " + std::string(e.what()));
      }
    }
  }
  return rt;
}

bool wants_evidence(const RunConfig& config) {
  return config.plan.evidence_m > 0 &&
         std::find(config.strategies.begin(), config.strategies.end(), Strategy::XMBR) != config.strategies.end();
}

struct PooledPrompt {
  SamplePool pool;
  Sample greedy;
};

PooledPrompt build_pool(const Runtime& rt, const RunConfig& config, const SamplingPlan& plan, const PromptRecord& prompt,
                        CallLedger& ledger) {
  PooledPrompt out{assemble_pool(*rt.generator, prompt, plan, ledger), {}};
  if (wants_evidence(config)) out.pool = extend_evidence(*rt.generator, prompt, out.pool, plan, ledger);
  if (auto g = out.pool.greedy_index()) {
    out.greedy = out.pool.hypotheses[*g];
  } else {
    auto samples = rt.generator->generate(prompt, DecodeParams{0.0, 0.0, plan.max_tokens, std::nullopt}, 1,
                                          std::nullopt, ledger);
    out.greedy = std::move(samples.front());
    out.greedy.provenance = Provenance::Greedy;
  }
  return out;
}

nlohmann::json pool_line(const PromptRecord& prompt, const PooledPrompt& p) {
  return {{"prompt", prompt}, {"pool", p.pool}, {"greedy", p.greedy}};
}

struct Evaluation {
  nlohmann::json selections = nlohmann::json::array();
  nlohmann::json pool_diagnostics;
  std::vector<MetricRecord> metrics;
};

Verdict judge_verdict(JudgeBackend& judge, const PromptRecord& prompt, const Sample& a, const Sample& b,
                      CallLedger& ledger) {
  if (a.text == b.text) return Verdict::Tie;
  return judge.pairwise(prompt, a, b, PairKind::InLanguage, ledger).verdict;
}

double outcome_score(Verdict v) { return v == Verdict::FirstWins ? 1.0 : v == Verdict::SecondWins ? 0.0 : 0.5; }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and dataset

void RunConfig::validate() const {
  static const std::set<std::string> kRoles{"generator", "judge", "reward", "eval_judge"};
  for (const auto& [role, d] : backends) {
    if (!kRoles.count(role)) throw Error(ErrorCode::ConfigError, "unknown backend role '" + role + "'");
  }
  if (!backends.count("generator")) throw Error(ErrorCode::ConfigError, "a generator backend is required");
  if (strategies.empty()) throw Error(ErrorCode::ConfigError, "no strategies configured");
  for (auto s : strategies) {
    if (needs_judge(s) && !backends.count("judge")) {
      throw Error(ErrorCode::ConfigError, std::string(to_string(s)) + " needs a judge backend");
    }
    if (s == Strategy::RewardBoN && !backends.count("reward")) {
      throw Error(ErrorCode::ConfigError, "reward_bon needs a reward backend");
    }
    if (s == Strategy::XMBR && plan.evidence_m < 1 && selection.require_evidence) {
      throw Error(ErrorCode::ConfigError, "xmbr needs evidence_m >= 1");
    }
  }
  if (concurrency < 1) throw Error(ErrorCode::ConfigError, "concurrency must be at least 1");
  if (run_id.empty() || run_id.find('/') != std::string::npos) throw Error(ErrorCode::ConfigError, "invalid run_id");
  if (baseline.kind == BaselineKind::ExternalModel && baseline.path.empty()) {
    throw Error(ErrorCode::ConfigError, "external baseline needs a path");
  }
  try {
    plan.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
}

RunConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    fs::path q(p);
    return q.is_relative() && !base_dir.empty() ? base_dir / q : q;
  };
  try {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    c.dataset_path = resolve(j.at("dataset").get<std::string>());
    for (const auto& [role, d] : j.at("backends").items()) c.backends.emplace(role, d.get<BackendDescriptor>());
    c.scorer = j.value("scorer", nlohmann::json());
    c.seed = j.value("seed", std::uint64_t{0});
    nlohmann::json sampling = j.value("sampling", nlohmann::json::object());
    if (!sampling.contains("seed")) sampling["seed"] = c.seed;
    c.plan = build_plan(sampling);
    for (const auto& s : j.at("strategies")) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    const auto sel = j.value("selection", nlohmann::json::object());
    c.selection.pair_mode = parse_pair_mode(sel.value("pair_mode", std::string("single")));
    c.selection.length_normalize = sel.value("length_normalize", false);
    c.selection.checklist = parse_checklist_mode(sel.value("checklist", std::string("in_call")));
    c.selection.context_budget_tokens = sel.value("context_budget_tokens", c.selection.context_budget_tokens);
    c.selection.parallelism = sel.value("parallelism", std::size_t{1});
    c.selection.require_evidence = sel.value("require_evidence", c.selection.require_evidence);
    if (j.contains("baseline")) {
      const auto& b = j["baseline"];
      std::string kind = b.at("kind").get<std::string>();
      if (kind == "external") {
        c.baseline.kind = BaselineKind::ExternalModel;
        c.baseline.path = resolve(b.at("path").get<std::string>());
      } else if (kind != "greedy") {
        throw Error(ErrorCode::ConfigError, "unknown baseline kind '" + kind + "'");
      }
    }
    c.concurrency = j.value("concurrency", c.concurrency);
    if (j.contains("cache_dir")) c.cache_dir = resolve(j["cache_dir"].get<std::string>());
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("templates_dir")) c.templates_dir = resolve(j["templates_dir"].get<std::string>());
    c.run_id = j.value("run_id", c.run_id);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

std::vector<PromptRecord> load_dataset(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "dataset not found: " + path.string());
  std::istringstream in(read_file(path));
  std::vector<PromptRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": record needs a string id");
    }
    std::string id = j["id"].get<std::string>();
    PromptRecord record;
    try {
      record = j.get<PromptRecord>();
      validate_prompt_record(record);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ValidationError, "record '" + id + "': " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::ValidationError, "record '" + id + "': " + e.what());
    }
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::DuplicateId, "line " + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    out.push_back(std::move(record));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run ledger

std::string_view to_string(PromptStatus s) {
  switch (s) {
    case PromptStatus::Pending: return "pending";
    case PromptStatus::Sampled: return "sampled";
    case PromptStatus::Selected: return "selected";
    case PromptStatus::Scored: return "scored";
    case PromptStatus::Failed: return "failed";
  }
  return "pending";
}

PromptStatus parse_prompt_status(std::string_view name) {
  for (auto s : {PromptStatus::Pending, PromptStatus::Sampled, PromptStatus::Selected, PromptStatus::Scored,
                 PromptStatus::Failed}) {
    if (to_string(s) == name) return s;
  }
  throw Error(ErrorCode::ParseError, "unknown prompt status '" + std::string(name) + "'");
}

void RunLedger::advance(const std::string& id, PromptStatus status, const CallLedger& ledger) {
  auto& state = prompts_[id];
  if (state.status == PromptStatus::Failed || status == PromptStatus::Failed || status < state.status) {
    throw Error(ErrorCode::InvalidParams, id + ": cannot move from " + std::string(to_string(state.status)) + " to " +
                                              std::string(to_string(status)));
  }
  state.status = status;
  state.ledger = ledger;
  state.updated = utc_timestamp();
}

void RunLedger::fail(const std::string& id, const std::string& reason, const CallLedger& ledger) {
  auto& state = prompts_[id];
  if (state.status == PromptStatus::Scored || state.status == PromptStatus::Failed) {
    throw Error(ErrorCode::InvalidParams, id + ": cannot fail a finished prompt");
  }
  state.status = PromptStatus::Failed;
  state.reason = reason;
  state.ledger = ledger;
  state.updated = utc_timestamp();
}

const PromptState& RunLedger::state(const std::string& id) const {
  auto it = prompts_.find(id);
  if (it == prompts_.end()) throw Error(ErrorCode::InvalidParams, "unknown prompt '" + id + "'");
  return it->second;
}

CallLedger RunLedger::total() const {
  CallLedger sum;
  for (const auto& [id, state] : prompts_) sum += state.ledger;
  return sum;
}

nlohmann::json RunLedger::to_json() const {
  nlohmann::json prompts = nlohmann::json::object();
  for (const auto& [id, s] : prompts_) {
    prompts[id] = {{"status", to_string(s.status)}, {"ledger", s.ledger}, {"updated", s.updated}};
    if (!s.reason.empty()) prompts[id]["reason"] = s.reason;
  }
  return {{"prompts", prompts}, {"total", total()}};
}

RunLedger RunLedger::from_json(const nlohmann::json& j) {
  RunLedger out;
  try {
    for (const auto& [id, s] : j.at("prompts").items()) {
      PromptState state;
      state.status = parse_prompt_status(s.at("status").get<std::string>());
      state.ledger = s.value("ledger", CallLedger{});
      state.updated = s.value("updated", std::string{});
      state.reason = s.value("reason", std::string{});
      out.prompts_[id] = std::move(state);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("run ledger: ") + e.what());
  }
  return out;
}

RunLedger RunLedger::load(const fs::path& path) {
  if (!fs::exists(path)) return {};
  try {
    return from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void RunLedger::save(const fs::path& path) const { write_file_atomic(path, to_json().dump(2) + '\n'); }

// ---------------------------------------------------------------------------
// Evaluation of one prompt

namespace {

Evaluation evaluate(const Runtime& rt, const RunConfig& config, const PromptRecord& prompt, const PooledPrompt& pooled,
                    CallLedger& ledger, RunLedger* run_ledger, std::mutex* ledger_mutex) {
  const SamplePool& pool = pooled.pool;
  Evaluation ev;
  auto metric = [&](const std::string& strategy, const std::string& name, std::optional<double> value,
                    std::string note = {}) {
    ev.metrics.push_back({prompt.id, prompt.language, prompt.task, strategy, name, value, std::move(note)});
  };

  std::vector<SelectionOutcome> outcomes;
  SelectionBackends backends{rt.judge.get(), rt.reward.get()};
  for (auto strategy : config.strategies) {
    outcomes.push_back(select(strategy, backends, prompt, pool, config.selection));
    ledger += outcomes.back().ledger;
  }
  if (run_ledger != nullptr) {
    std::lock_guard lock(*ledger_mutex);
    if (run_ledger->state(prompt.id).status < PromptStatus::Selected) {
      run_ledger->advance(prompt.id, PromptStatus::Selected, ledger);
      run_ledger->save(config.run_dir() / kLedger);
    }
  }

  QualityScorer& scorer = rt.scorer_for(prompt.task);
  auto scores = scorer.score_all(prompt, pool.hypotheses, ledger);
  double greedy_score = 0.0;
  if (auto g = pool.greedy_index()) {
    greedy_score = scores[*g];
  } else {
    greedy_score = scorer.score(prompt, pooled.greedy, ledger);
  }

  std::optional<PoolDiagnostics> diag;
  std::string excluded;
  try {
    diag = diagnostics_from_scores(scores, greedy_score);
    ev.pool_diagnostics = {{"greedy_score", diag->greedy_score},
                           {"best_score", diag->best_score},
                           {"worst_score", diag->worst_score},
                           {"hope", diag->hope},
                           {"risk", diag->risk}};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroGreedyScore) throw;
    excluded = "zero greedy score";
    ev.pool_diagnostics = {{"greedy_score", greedy_score}, {"excluded", excluded}};
  }
  metric("pool", "hope", diag ? std::optional(diag->hope) : std::nullopt, excluded);
  metric("pool", "risk", diag ? std::optional(diag->risk) : std::nullopt, excluded);
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  metric("pool", "best_score", *std::max_element(scores.begin(), scores.end()));
  metric("pool", "worst_score", *std::min_element(scores.begin(), scores.end()));
  metric("pool", "mean_score", mean);

  bool math = prompt.task == TaskKind::MathReasoning;
  std::string score_name = math ? "accuracy" : "score";
  metric("greedy", score_name, greedy_score);

  bool win_rates = prompt.task == TaskKind::OpenEnded && rt.eval_judge != nullptr;
  std::optional<Sample> external;
  std::optional<double> greedy_vs_external;
  if (win_rates && config.baseline.kind == BaselineKind::ExternalModel) {
    auto it = rt.external.find(prompt.id);
    if (it == rt.external.end()) throw Error(ErrorCode::ValidationError, prompt.id + ": no external baseline output");
    external = external_sample(it->second, prompt.language);
    greedy_vs_external = outcome_score(judge_verdict(*rt.eval_judge, prompt, pooled.greedy, *external, ledger));
    metric("greedy", "win_rate", *greedy_vs_external);
  }

  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto& outcome = outcomes[k];
    std::string name(to_string(outcome.strategy));
    const Sample& chosen = pool.hypotheses[outcome.chosen_index];
    double chosen_score = scores[outcome.chosen_index];

    nlohmann::json evaluation = nlohmann::json::object();
    evaluation[score_name] = chosen_score;
    evaluation[score_name + "_delta"] = chosen_score - greedy_score;
    metric(name, score_name, chosen_score);
    metric(name, score_name + "_delta", chosen_score - greedy_score);
    if (auto g = pool.greedy_index()) {
      double picked = outcome.chosen_index == *g ? 1.0 : 0.0;
      evaluation["greedy_pick"] = picked;
      metric(name, "greedy_pick_rate", picked);
    }
    if (win_rates) {
      double value = 0.0;
      double delta = 0.0;
      if (external) {
        value = outcome_score(judge_verdict(*rt.eval_judge, prompt, chosen, *external, ledger));
        delta = value - *greedy_vs_external;
      } else {
        value = outcome_score(judge_verdict(*rt.eval_judge, prompt, chosen, pooled.greedy, ledger));
        delta = value - 0.5;
      }
      evaluation["win_rate"] = value;
      evaluation["win_rate_delta"] = delta;
      metric(name, "win_rate", value);
      metric(name, "win_rate_delta", delta);
    }

    nlohmann::json diagnostics = ev.pool_diagnostics;
    diagnostics["chosen_score"] = chosen_score;
    nlohmann::json record = {{"id", prompt.id},
                             {"strategy", name},
                             {"chosen_index", outcome.chosen_index},
                             {"chosen_text", chosen.text},
                             {"scores", outcome.per_candidate_score},
                             {"ledger", outcome.ledger},
                             {"diagnostics", diagnostics},
                             {"evaluation", evaluation}};
    if (outcome.rationale) record["rationale"] = *outcome.rationale;
    ev.selections.push_back(std::move(record));
  }
  return ev;
}

nlohmann::json metrics_to_json(const std::vector<MetricRecord>& metrics) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : metrics) {
    nlohmann::json j = {{"strategy", m.strategy},
                        {"metric", m.metric},
                        {"value", m.value ? nlohmann::json(*m.value) : nlohmann::json(nullptr)}};
    if (!m.note.empty()) j["note"] = m.note;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<MetricRecord> metrics_from_result(const nlohmann::json& line) {
  std::vector<MetricRecord> out;
  std::string id = line.at("id").get<std::string>();
  LanguageTag language = line.at("language").get<LanguageTag>();
  TaskKind task = parse_task_kind(line.at("task").get<std::string>());
  for (const auto& m : line.at("metrics")) {
    MetricRecord r{id, language, task, m.at("strategy").get<std::string>(), m.at("metric").get<std::string>(),
                   std::nullopt, m.value("note", std::string{})};
    if (!m.at("value").is_null()) r.value = m["value"].get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  // Avoid "-0.000000" for values that round to zero.
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// run

RunSummary run(const RunConfig& config) {
  config.validate();
  auto prompts = load_dataset(config.dataset_path);
  Runtime rt = build_runtime(config, prompts);

  fs::path dir = config.run_dir();
  fs::create_directories(dir);
  fs::path ledger_path = dir / kLedger;
  RunSummary summary;
  RunLedger& ledger = summary.ledger;
  ledger = RunLedger::load(ledger_path);

  // Keep only output of prompts that finished; anything else is redone.
  auto keep_finished = [&](const fs::path& path) {
    std::string kept;
    std::set<std::string> seen;
    for (const auto& line : read_json_lines(path)) {
      std::string id = line.contains("id") ? line["id"].get<std::string>() : line.at("prompt").at("id").get<std::string>();
      if (ledger.contains(id) && ledger.state(id).status == PromptStatus::Scored && seen.insert(id).second) {
        kept += line.dump() + '\n';
      }
    }
    write_file_atomic(path, kept);
  };
  keep_finished(dir / kResults);
  keep_finished(dir / kPools);

  std::vector<const PromptRecord*> todo;
  for (const auto& p : prompts) {
    if (!ledger.contains(p.id)) ledger.advance(p.id, PromptStatus::Pending);
    auto status = ledger.state(p.id).status;
    if (status == PromptStatus::Scored || status == PromptStatus::Failed) {
      ++summary.skipped;
    } else {
      todo.push_back(&p);
    }
  }
  ledger.save(ledger_path);

  std::mutex mutex;
  parallel_for(todo.size(), static_cast<std::size_t>(config.concurrency), [&](std::size_t k) {
    const PromptRecord& prompt = *todo[k];
    CallLedger calls;
    try {
      PooledPrompt pooled = build_pool(rt, config, config.plan, prompt, calls);
      {
        std::lock_guard lock(mutex);
        append_line(dir / kPools, pool_line(prompt, pooled).dump());
        if (ledger.state(prompt.id).status < PromptStatus::Sampled) ledger.advance(prompt.id, PromptStatus::Sampled, calls);
        ledger.save(ledger_path);
      }
      Evaluation ev = evaluate(rt, config, prompt, pooled, calls, &ledger, &mutex);
      nlohmann::json line = {{"id", prompt.id},
                             {"language", prompt.language},
                             {"task", to_string(prompt.task)},
                             {"selections", ev.selections},
                             {"pool_diagnostics", ev.pool_diagnostics},
                             {"ledger", calls},
                             {"metrics", metrics_to_json(ev.metrics)}};
      std::lock_guard lock(mutex);
      append_line(dir / kResults, line.dump());
      ledger.advance(prompt.id, PromptStatus::Scored, calls);
      ledger.save(ledger_path);
      ++summary.completed;
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex);
      ledger.fail(prompt.id, error_text(e), calls);
      ledger.save(ledger_path);
    }
  });

  std::vector<MetricRecord> records = load_metric_records(dir);
  summary.report = aggregate_report(records);
  for (const auto& [id, state] : ledger.prompts()) {
    if (state.status == PromptStatus::Failed) {
      ++summary.failed;
      summary.report.failures.push_back(id + ": " + state.reason);
    }
  }
  emit_report(summary.report, records, dir);
  return summary;
}

std::vector<MetricRecord> load_metric_records(const fs::path& run_dir) {
  std::vector<MetricRecord> out;
  try {
    for (const auto& line : read_json_lines(run_dir / kResults)) {
      auto part = metrics_from_result(line);
      out.insert(out.end(), part.begin(), part.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("results: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// sample / select

std::vector<SamplePool> sample_pools(const RunConfig& config) {
  config.validate();
  auto prompts = load_dataset(config.dataset_path);
  Runtime rt = build_runtime(config, prompts);
  fs::path dir = config.run_dir();
  fs::create_directories(dir);

  std::vector<std::optional<nlohmann::json>> lines(prompts.size());
  std::vector<std::optional<SamplePool>> pools(prompts.size());
  parallel_for(prompts.size(), static_cast<std::size_t>(config.concurrency), [&](std::size_t i) {
    CallLedger calls;
    try {
      auto pooled = build_pool(rt, config, config.plan, prompts[i], calls);
      lines[i] = pool_line(prompts[i], pooled);
      pools[i] = std::move(pooled.pool);
    } catch (const std::exception& e) {
      lines[i] = nlohmann::json{{"prompt", prompts[i]}, {"error", e.what()}};
    }
  });
  std::string content;
  std::vector<SamplePool> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    content += lines[i]->dump() + '\n';
    if (pools[i]) out.push_back(std::move(*pools[i]));
  }
  write_file_atomic(dir / kPools, content);
  return out;
}

std::vector<std::pair<PromptRecord, SamplePool>> load_pools(const fs::path& dir) {
  fs::path path = fs::is_directory(dir) ? dir / kPools : dir;
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "no pools at " + path.string());
  std::vector<std::pair<PromptRecord, SamplePool>> out;
  try {
    for (const auto& line : read_json_lines(path)) {
      if (line.contains("error")) continue;
      out.emplace_back(line.at("prompt").get<PromptRecord>(), line.at("pool").get<SamplePool>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return out;
}

std::vector<nlohmann::json> select_pools(const fs::path& dir, Strategy strategy, const std::optional<RunConfig>& config) {
  auto pools = load_pools(dir);
  std::vector<PromptRecord> prompts;
  for (const auto& [p, pool] : pools) prompts.push_back(p);
  std::optional<Runtime> rt;
  SelectionOptions options;
  if (config) {
    rt = build_runtime(*config, prompts);
    options = config->selection;
  }
  SelectionBackends backends{rt ? rt->judge.get() : nullptr, rt ? rt->reward.get() : nullptr};

  std::vector<nlohmann::json> out;
  for (const auto& [prompt, pool] : pools) {
    try {
      auto outcome = select(strategy, backends, prompt, pool, options);
      nlohmann::json record = {{"id", prompt.id},
                               {"strategy", to_string(strategy)},
                               {"chosen_index", outcome.chosen_index},
                               {"chosen_text", pool.hypotheses[outcome.chosen_index].text},
                               {"scores", outcome.per_candidate_score},
                               {"ledger", outcome.ledger},
                               {"diagnostics", nullptr}};
      if (outcome.rationale) record["rationale"] = *outcome.rationale;
      out.push_back(std::move(record));
    } catch (const std::exception& e) {
      out.push_back({{"id", prompt.id}, {"strategy", to_string(strategy)}, {"error", e.what()}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

std::string render_csv(const QualityReport& report) {
  std::string out = "language,task,strategy,metric,value,n,excluded\n";
  for (const auto& c : report.cells) {
    out += c.language + ',' + std::string(to_string(c.task)) + ',' + c.strategy + ',' + c.metric + ',' +
           format_fixed(c.value, 6) + ',' + std::to_string(c.n) + ',' + std::to_string(c.excluded) + '\n';
  }
  return out;
}

std::string render_markdown(const QualityReport& report) {
  std::ostringstream md;
  md << "# Selection report\n";

  std::set<TaskKind> tasks;
  for (const auto& c : report.cells) tasks.insert(c.task);

  for (auto task : tasks) {
    md << "\n## " << to_string(task) << "\n";

    // Scopes: the two roll-ups, then every language.
    std::vector<std::string> languages;
    std::vector<std::string> strategies;
    std::vector<std::string> metrics;
    auto add_unique = [](std::vector<std::string>& v, const std::string& s) {
      if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    for (const auto& c : report.cells) {
      if (c.task != task) continue;
      add_unique(languages, c.language);
      if (c.strategy != "pool") {
        add_unique(strategies, c.strategy);
        add_unique(metrics, c.metric);
      }
    }

    auto rollup = [&](bool english, const std::string& strategy, const std::string& metric) -> std::optional<double> {
      for (const auto& r : report.rollups) {
        if (r.task == task && r.english == english && r.strategy == strategy && r.metric == metric) return r.value;
      }
      return std::nullopt;
    };
    auto cell = [&](const std::string& language, const std::string& strategy,
                    const std::string& metric) -> const ReportCell* {
      for (const auto& c : report.cells) {
        if (c.task == task && c.language == language && c.strategy == strategy && c.metric == metric) return &c;
      }
      return nullptr;
    };
    struct Scope {
      std::string label;
      std::function<std::optional<double>(const std::string&, const std::string&)> value;
    };
    std::vector<Scope> scopes{
        {"English", [&](const std::string& s, const std::string& m) { return rollup(true, s, m); }},
        {"non-English", [&](const std::string& s, const std::string& m) { return rollup(false, s, m); }}};
    for (const auto& l : languages) {
      scopes.push_back({l, [&, l](const std::string& s, const std::string& m) -> std::optional<double> {
                          const ReportCell* c = cell(l, s, m);
                          if (c == nullptr || c->n == 0) return std::nullopt;
                          return c->value;
                        }});
    }

    md << "\n### Pool quality\n\n| scope | hope (%) | risk (%) | best | worst | mean |\n|---|---|---|---|---|---|\n";
    for (const auto& scope : scopes) {
      md << "| " << scope.label;
      for (const char* m : {"hope", "risk", "best_score", "worst_score", "mean_score"}) {
        auto v = scope.value("pool", m);
        md << " | " << (v ? format_fixed(*v, 2) : "-");
      }
      md << " |\n";
    }

    if (strategies.empty()) continue;
    md << "\n### Strategies\n\n| metric | scope |";
    for (const auto& s : strategies) md << ' ' << s << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < strategies.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& metric : metrics) {
      for (const auto& scope : scopes) {
        std::vector<std::optional<double>> row;
        for (const auto& s : strategies) row.push_back(scope.value(s, metric));
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (row[i] && (!best || *row[i] > *row[*best])) best = i;
        }
        md << "| " << metric << " | " << scope.label << " |";
        for (std::size_t i = 0; i < row.size(); ++i) {
          std::string text = row[i] ? format_fixed(*row[i], 2) : "-";
          if (best && i == *best) text = "**" + text + "**";
          md << ' ' << text << " |";
        }
        md << '\n';
      }
    }
  }

  if (!report.exclusions.empty()) {
    md << "\n## Excluded records\n\n";
    for (const auto& e : report.exclusions) md << "- " << e << '\n';
  }
  if (!report.failures.empty()) {
    md << "\n## Failed prompts\n\n";
    for (const auto& f : report.failures) md << "- " << f << '\n';
  }
  if (!report.notes.empty()) {
    md << "\n## Notes\n\n";
    for (const auto& n : report.notes) md << "- " << n << '\n';
  }
  return md.str();
}

void emit_report(const QualityReport& report, const std::vector<MetricRecord>& raw, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  write_file_atomic(dir / "report.csv", render_csv(report));
  write_file_atomic(dir / "report.md", render_markdown(report));
  write_file_atomic(dir / "report.json", report_to_json(report).dump(2) + '\n');
  std::string lines;
  for (const auto& r : raw) {
    nlohmann::json j = {{"id", r.prompt_id},
                        {"language", r.language},
                        {"task", to_string(r.task)},
                        {"strategy", r.strategy},
                        {"metric", r.metric},
                        {"value", r.value ? nlohmann::json(*r.value) : nlohmann::json(nullptr)}};
    if (!r.note.empty()) j["note"] = r.note;
    lines += j.dump() + '\n';
  }
  write_file_atomic(dir / "metrics.jsonl", lines);
}

// ---------------------------------------------------------------------------
// scan

ScalingTable scan_pool_sizes(const RunConfig& config, const std::vector<int>& sizes) {
  config.validate();
  if (sizes.empty()) throw Error(ErrorCode::ConfigError, "no pool sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1 || (i > 0 && sizes[i] <= sizes[i - 1])) {
      throw Error(ErrorCode::ConfigError, "pool sizes must be positive and strictly ascending");
    }
  }
  auto prompts = load_dataset(config.dataset_path);
  Runtime rt = build_runtime(config, prompts);

  // Per prompt and size: best-of-pool, then (chosen score, delta) per strategy.
  struct PerSize {
    SamplePool pool;
    double best = 0.0;
    std::vector<std::pair<double, double>> chosen;
  };
  std::vector<std::vector<PerSize>> results(prompts.size());
  std::vector<std::string> errors(prompts.size());

  parallel_for(prompts.size(), static_cast<std::size_t>(config.concurrency), [&](std::size_t i) {
    const PromptRecord& prompt = prompts[i];
    try {
      std::vector<PerSize> rows;
      for (int n : sizes) {
        CallLedger calls;
        PooledPrompt pooled = build_pool(rt, config, config.plan.resized(n), prompt, calls);
        QualityScorer& scorer = rt.scorer_for(prompt.task);
        auto scores = scorer.score_all(prompt, pooled.pool.hypotheses, calls);
        auto g = pooled.pool.greedy_index();
        double greedy_score = g ? scores[*g] : scorer.score(prompt, pooled.greedy, calls);
        PerSize row{pooled.pool, *std::max_element(scores.begin(), scores.end()), {}};
        SelectionBackends backends{rt.judge.get(), rt.reward.get()};
        for (auto strategy : config.strategies) {
          auto outcome = select(strategy, backends, prompt, pooled.pool, config.selection);
          double s = scores[outcome.chosen_index];
          row.chosen.emplace_back(s, s - greedy_score);
        }
        rows.push_back(std::move(row));
      }
      results[i] = std::move(rows);
    } catch (const std::exception& e) {
      errors[i] = prompt.id + ": " + e.what();
    }
  });

  ScalingTable table;
  std::size_t ok = 0;
  std::vector<PerSize> sums(sizes.size());
  for (auto& s : sums) s.chosen.assign(config.strategies.size(), {0.0, 0.0});
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (!errors[i].empty()) {
      table.failures.push_back(errors[i]);
      continue;
    }
    ++ok;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const auto& r = results[i][k];
      sums[k].best += r.best;
      for (std::size_t s = 0; s < r.chosen.size(); ++s) {
        sums[k].chosen[s].first += r.chosen[s].first;
        sums[k].chosen[s].second += r.chosen[s].second;
      }
      table.pools[sizes[k]].push_back(r.pool);
    }
  }
  if (ok > 0) {
    double denom = static_cast<double>(ok);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      table.rows.push_back({sizes[k], "pool", "best_of_pool", sums[k].best / denom, ok});
      for (std::size_t s = 0; s < config.strategies.size(); ++s) {
        std::string name(to_string(config.strategies[s]));
        table.rows.push_back({sizes[k], name, "chosen_score", sums[k].chosen[s].first / denom, ok});
        table.rows.push_back({sizes[k], name, "delta_vs_greedy", sums[k].chosen[s].second / denom, ok});
      }
    }
  }
  fs::create_directories(config.run_dir());
  write_file_atomic(config.run_dir() / "scan.csv", render_scaling_csv(table));
  return table;
}

std::string render_scaling_csv(const ScalingTable& table) {
  std::string out = "n,strategy,metric,value,prompts\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.n) + ',' + r.strategy + ',' + r.metric + ',' + format_fixed(r.value, 6) + ',' +
           std::to_string(r.prompts) + '\n';
  }
  return out;
}

}  // namespace polysel
