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

#include "polysel/metrics.hpp"

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <thread>
#include <tuple>

#include "polysel/serialize.hpp"
#include "polysel/synthetic_backends.hpp"

extern char** environ;

namespace polysel {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Optional sign, optional currency, grouped or plain digits, optional decimals.
const std::regex& number_pattern() {
  static const std::regex re(R"((-?)(?:(?:\$|€|£|¥|₹)\s?)?(\d{1,3}(?:,\d{3})+|\d+)(\.\d+)?)");
  return re;
}

struct NumberMatch {
  std::size_t position;
  std::string value;
};

std::vector<NumberMatch> find_numbers(std::string_view text) {
  std::vector<NumberMatch> out;
  std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), number_pattern()); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    auto pos = static_cast<std::size_t>(m.position(0));
    // A minus sign glued to a preceding word or digit is a hyphen.
    bool negative = m[1].matched && m.length(1) > 0 &&
                    (pos == 0 || !std::isalnum(static_cast<unsigned char>(s[pos - 1])));
    // Digits glued to letters or further digits before the match belong to
    // an identifier, not a number ("x2", "1,2345").
    std::size_t digits_at = static_cast<std::size_t>(m.position(2));
    if (digits_at > 0) {
      unsigned char before = static_cast<unsigned char>(s[digits_at - 1]);
      if (std::isalpha(before) || std::isdigit(before) || before == ',') continue;
    }
    std::string digits = m[2].str();
    digits.erase(std::remove(digits.begin(), digits.end(), ','), digits.end());
    out.push_back({pos, (negative ? "-" : "") + digits + m[3].str()});
  }
  return out;
}

double outcome_value(Outcome o) {
  switch (o) {
    case Outcome::Win: return 1.0;
    case Outcome::Loss: return 0.0;
    case Outcome::Tie: return 0.5;
  }
  return 0.5;
}

// Spawns argv, feeds `input` to its stdin from a helper thread and returns
// its stdout. Throws Error(BackendError) on spawn failure or non-zero exit.
std::string run_process(const std::vector<std::string>& argv, const std::string& input) {
  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0) throw Error(ErrorCode::IoError, "pipe failed");
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    throw Error(ErrorCode::IoError, "pipe failed");
  }

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, to_child[1]);
  posix_spawn_file_actions_addclose(&actions, from_child[0]);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(to_child[0]);
  close(from_child[1]);
  if (rc != 0) {
    close(to_child[1]);
    close(from_child[0]);
    throw Error(ErrorCode::BackendError, "cannot start scorer plugin '" + argv.front() + "'");
  }

  std::thread writer([fd = to_child[1], &input] {
    std::size_t done = 0;
    while (done < input.size()) {
      ssize_t w = write(fd, input.data() + done, input.size() - done);
      if (w < 0 && errno == EINTR) continue;
      if (w <= 0) break;  // plugin closed its input early
      done += static_cast<std::size_t>(w);
    }
    close(fd);
  });

  std::string output;
  char buf[4096];
  for (;;) {
    ssize_t r = read(from_child[0], buf, sizeof buf);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) break;
    output.append(buf, static_cast<std::size_t>(r));
  }
  close(from_child[0]);
  writer.join();

  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw Error(ErrorCode::BackendError, "scorer plugin '" + argv.front() + "' exited abnormally");
  }
  return output;
}

}  // namespace

std::string_view to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::RewardBacked: return "reward";
    case ScorerKind::ExactMatch: return "exact_match";
    case ScorerKind::ReferenceScorerPlugin: return "plugin";
    case ScorerKind::SyntheticOracle: return "synthetic_oracle";
  }
  return "reward";
}

ScorerKind parse_scorer_kind(std::string_view name) {
  for (auto k : {ScorerKind::RewardBacked, ScorerKind::ExactMatch, ScorerKind::ReferenceScorerPlugin,
                 ScorerKind::SyntheticOracle}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::ConfigError, "unknown scorer kind '" + std::string(name) + "'");
}

double QualityScorer::score(const PromptRecord& prompt, const Sample& sample, CallLedger& ledger) {
  return score_all(prompt, std::span<const Sample>(&sample, 1), ledger).front();
}

std::vector<double> RewardScorer::score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                            CallLedger& ledger) {
  std::vector<double> out;
  for (const auto& s : samples) {
    double v = reward_->score(prompt, s, ledger);
    if (!std::isfinite(v)) throw Error(ErrorCode::MalformedResponse, "reward is not finite");
    out.push_back(v);
  }
  return out;
}

ExactMatchScorer::ExactMatchScorer(std::vector<std::string> markers)
    : markers_(markers.empty() ? default_answer_markers() : std::move(markers)) {}

std::vector<double> ExactMatchScorer::score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                                CallLedger&) {
  if (!prompt.answer) throw Error(ErrorCode::MissingAnswer, prompt.id + ": exact match needs a gold answer");
  std::vector<double> out;
  for (const auto& s : samples) out.push_back(exact_match(extract_final_answer(s.text, markers_), *prompt.answer));
  return out;
}

PluginScorer::PluginScorer(std::vector<std::string> argv) : argv_(std::move(argv)) {
  if (argv_.empty()) throw Error(ErrorCode::ConfigError, "scorer plugin needs a command");
  // A plugin that exits before reading all input must not kill the caller.
  static const bool ignored = [] { return ::signal(SIGPIPE, SIG_IGN) != SIG_ERR; }();
  (void)ignored;
}

std::vector<double> PluginScorer::score_all(const PromptRecord& prompt, std::span<const Sample> samples,
                                            CallLedger&) {
  if (!prompt.reference) throw Error(ErrorCode::MissingReference, prompt.id + ": plugin scoring needs a reference");
  std::string input;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    nlohmann::json line = {{"id", prompt.id + "#" + std::to_string(i)},
                           {"source", prompt.text},
                           {"hypothesis", samples[i].text},
                           {"reference", *prompt.reference}};
    input += line.dump() + '\n';
  }
  std::string output = run_process(argv_, input);

  std::map<std::string, double> by_id;
  std::size_t start = 0;
  while (start < output.size()) {
    std::size_t nl = output.find('\n', start);
    std::string_view line = trim(std::string_view(output).substr(start, nl == std::string::npos ? nl : nl - start));
    start = nl == std::string::npos ? output.size() : nl + 1;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      double v = j.at("score").get<double>();
      if (!std::isfinite(v)) throw Error(ErrorCode::MalformedResponse, "plugin score is not finite");
      by_id[j.at("id").get<std::string>()] = v;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedResponse, std::string("plugin output: ") + e.what());
    }
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto it = by_id.find(prompt.id + "#" + std::to_string(i));
    if (it == by_id.end()) throw Error(ErrorCode::MalformedResponse, "plugin returned no score for sample " + std::to_string(i));
    out.push_back(it->second);
  }
  return out;
}

std::vector<double> SyntheticOracleScorer::score_all(const PromptRecord&, std::span<const Sample> samples,
                                                     CallLedger&) {
  std::vector<double> out;
  for (const auto& s : samples) out.push_back(require_synthetic_quality(s.text));
  return out;
}

std::unique_ptr<QualityScorer> make_scorer(const nlohmann::json& spec, std::shared_ptr<RewardBackend> reward) {
  try {
    auto kind = parse_scorer_kind(spec.at("kind").get<std::string>());
    switch (kind) {
      case ScorerKind::RewardBacked:
        if (!reward) throw Error(ErrorCode::ConfigError, "reward scorer needs a reward backend");
        return std::make_unique<RewardScorer>(std::move(reward));
      case ScorerKind::ExactMatch:
        return std::make_unique<ExactMatchScorer>(spec.value("markers", std::vector<std::string>{}));
      case ScorerKind::ReferenceScorerPlugin:
        return std::make_unique<PluginScorer>(spec.at("command").get<std::vector<std::string>>());
      case ScorerKind::SyntheticOracle:
        return std::make_unique<SyntheticOracleScorer>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("scorer: ") + e.what());
  }
  throw Error(ErrorCode::ConfigError, "scorer: unknown kind");
}

PoolDiagnostics diagnostics_from_scores(std::span<const double> scores, double greedy_score) {
  if (scores.empty()) throw Error(ErrorCode::InvalidParams, "no scores");
  if (greedy_score == 0.0) throw Error(ErrorCode::ZeroGreedyScore, "greedy score is zero");
  PoolDiagnostics d;
  d.greedy_score = greedy_score;
  d.best_score = *std::max_element(scores.begin(), scores.end());
  d.worst_score = *std::min_element(scores.begin(), scores.end());
  double scale = std::fabs(greedy_score);
  d.hope = (d.best_score - greedy_score) / scale;
  d.risk = (d.worst_score - greedy_score) / scale;
  return d;
}

PoolDiagnostics pool_diagnostics(const PromptRecord& prompt, const SamplePool& pool, QualityScorer& scorer,
                                 const Sample& greedy, CallLedger& ledger) {
  auto scores = scorer.score_all(prompt, pool.hypotheses, ledger);
  double greedy_score = 0.0;
  auto in_pool = std::find(pool.hypotheses.begin(), pool.hypotheses.end(), greedy);
  if (in_pool != pool.hypotheses.end()) {
    greedy_score = scores[static_cast<std::size_t>(in_pool - pool.hypotheses.begin())];
  } else {
    greedy_score = scorer.score(prompt, greedy, ledger);
  }
  return diagnostics_from_scores(scores, greedy_score);
}

const std::vector<std::string>& default_answer_markers() {
  static const std::vector<std::string> markers{"answer is", "answer:", "final answer"};
  return markers;
}

std::string extract_final_answer(std::string_view text, std::span<const std::string> markers) {
  auto numbers = find_numbers(text);
  if (numbers.empty()) return "";

  std::string lowered = lower_ascii(text);
  std::optional<std::size_t> marker_end;
  for (const auto& m : markers) {
    if (m.empty()) continue;
    auto pos = lowered.rfind(lower_ascii(m));
    if (pos != std::string::npos && (!marker_end || pos + m.size() > *marker_end)) marker_end = pos + m.size();
  }
  if (marker_end) {
    for (const auto& n : numbers) {
      if (n.position >= *marker_end) return n.value;
    }
  }
  return numbers.back().value;
}

std::string extract_final_answer(std::string_view text) {
  return extract_final_answer(text, default_answer_markers());
}

std::string normalize_answer(std::string_view answer) {
  std::string s(trim(answer));
  std::string compact;
  for (char c : s) {
    if (c != ',' && c != '$') compact += c;
  }
  static const std::regex plain(R"(^([+-]?)(\d*)(?:\.(\d*))?$)");
  std::smatch m;
  if (!std::regex_match(compact, m, plain) || (m[2].length() == 0 && m[3].length() == 0)) return s;
  std::string integer = m[2].str();
  std::string fraction = m[3].str();
  integer.erase(0, std::min(integer.find_first_not_of('0'), integer.size()));
  if (integer.empty()) integer = "0";
  while (!fraction.empty() && fraction.back() == '0') fraction.pop_back();
  std::string out = integer + (fraction.empty() ? "" : "." + fraction);
  if (m[1].str() == "-" && out != "0") out = "-" + out;
  return out;
}

int exact_match(std::string_view candidate, std::string_view gold) {
  if (trim(gold).empty()) throw Error(ErrorCode::InvalidParams, "gold answer is empty");
  if (trim(candidate).empty()) return 0;
  return normalize_answer(candidate) == normalize_answer(gold) ? 1 : 0;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Win: return "win";
    case Outcome::Loss: return "loss";
    case Outcome::Tie: return "tie";
  }
  return "tie";
}

std::string_view to_string(BaselineKind b) {
  return b == BaselineKind::GreedySelf ? "greedy" : "external";
}

Outcome outcome_from_verdict(Verdict v) {
  switch (v) {
    case Verdict::FirstWins: return Outcome::Win;
    case Verdict::SecondWins: return Outcome::Loss;
    case Verdict::Tie: return Outcome::Tie;
  }
  return Outcome::Tie;
}

double win_rate(std::span<const WinRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecords, "no win records");
  double total = 0.0;
  for (const auto& r : records) total += outcome_value(r.outcome);
  return total / static_cast<double>(records.size());
}

double win_rate_delta(std::span<const WinRecord> strategy, std::span<const WinRecord> baseline) {
  std::multiset<std::string> a;
  std::multiset<std::string> b;
  for (const auto& r : strategy) a.insert(r.prompt_id);
  for (const auto& r : baseline) b.insert(r.prompt_id);
  if (a != b) throw Error(ErrorCode::InvalidParams, "win-rate delta needs the same prompts on both sides");
  return win_rate(strategy) - win_rate(baseline);
}

bool is_percent_metric(std::string_view metric) {
  static const std::set<std::string, std::less<>> percent{
      "hope", "risk", "win_rate", "win_rate_delta", "accuracy", "accuracy_delta", "greedy_pick_rate"};
  return percent.count(metric) > 0;
}

QualityReport aggregate_report(std::vector<MetricRecord> records) {
  std::sort(records.begin(), records.end(), [](const MetricRecord& x, const MetricRecord& y) {
    return std::tie(x.prompt_id, x.strategy, x.metric) < std::tie(y.prompt_id, y.strategy, y.metric);
  });

  struct Accum {
    double sum = 0.0;
    std::size_t n = 0;
    std::size_t excluded = 0;
  };
  using Key = std::tuple<std::string, TaskKind, std::string, std::string>;
  std::map<Key, Accum> groups;
  std::set<std::string> exclusions;
  for (const auto& r : records) {
    auto& acc = groups[Key{r.language.code(), r.task, r.strategy, r.metric}];
    if (r.value) {
      acc.sum += *r.value;
      ++acc.n;
    } else {
      ++acc.excluded;
      exclusions.insert(r.prompt_id + ": " + (r.note.empty() ? "excluded from " + r.metric : r.note));
    }
  }

  QualityReport report;
  report.exclusions.assign(exclusions.begin(), exclusions.end());
  using RollKey = std::tuple<TaskKind, std::string, std::string>;
  std::map<RollKey, std::pair<std::optional<double>, std::vector<double>>> rolls;
  std::set<TaskKind> tasks_with_other;
  std::set<TaskKind> tasks;
  for (const auto& [key, acc] : groups) {
    const auto& [language, task, strategy, metric] = key;
    ReportCell cell{language, task, strategy, metric, 0.0, acc.n, acc.excluded};
    double scale = is_percent_metric(metric) ? 100.0 : 1.0;
    auto& roll = rolls[RollKey{task, strategy, metric}];
    tasks.insert(task);
    if (language != "en") tasks_with_other.insert(task);
    if (acc.n > 0) {
      cell.value = scale * acc.sum / static_cast<double>(acc.n);
      if (language == "en") {
        roll.first = cell.value;
      } else {
        roll.second.push_back(cell.value);
      }
    }
    report.cells.push_back(std::move(cell));
  }
  for (const auto& [key, roll] : rolls) {
    const auto& [task, strategy, metric] = key;
    report.rollups.push_back({true, task, strategy, metric, roll.first, roll.first ? 1u : 0u});
    RollupCell other{false, task, strategy, metric, std::nullopt, roll.second.size()};
    if (!roll.second.empty()) {
      double sum = 0.0;
      for (double v : roll.second) sum += v;
      other.value = sum / static_cast<double>(roll.second.size());
    }
    report.rollups.push_back(std::move(other));
  }
  for (auto task : tasks) {
    if (!tasks_with_other.count(task)) {
      report.notes.push_back("non-English roll-up absent for " + std::string(to_string(task)) +
                             ": only English prompts");
    }
  }
  return report;
}

nlohmann::json report_to_json(const QualityReport& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"language", c.language},
                     {"task", to_string(c.task)},
                     {"strategy", c.strategy},
                     {"metric", c.metric},
                     {"value", c.value},
                     {"n", c.n},
                     {"excluded", c.excluded}});
  }
  nlohmann::json rollups = nlohmann::json::array();
  for (const auto& r : report.rollups) {
    rollups.push_back({{"scope", r.english ? "en" : "non_en"},
                       {"task", to_string(r.task)},
                       {"strategy", r.strategy},
                       {"metric", r.metric},
                       {"value", r.value ? nlohmann::json(*r.value) : nlohmann::json(nullptr)},
                       {"languages", r.languages}});
  }
  return {{"cells", cells},
          {"rollups", rollups},
          {"exclusions", report.exclusions},
          {"failures", report.failures},
          {"notes", report.notes}};
}

QualityReport report_from_json(const nlohmann::json& j) {
  QualityReport report;
  try {
    for (const auto& c : j.at("cells")) {
      report.cells.push_back({c.at("language").get<std::string>(), parse_task_kind(c.at("task").get<std::string>()),
                              c.at("strategy").get<std::string>(), c.at("metric").get<std::string>(),
                              c.at("value").get<double>(), c.at("n").get<std::size_t>(),
                              c.at("excluded").get<std::size_t>()});
    }
    for (const auto& r : j.at("rollups")) {
      RollupCell cell{r.at("scope").get<std::string>() == "en", parse_task_kind(r.at("task").get<std::string>()),
                      r.at("strategy").get<std::string>(), r.at("metric").get<std::string>(), std::nullopt,
                      r.at("languages").get<std::size_t>()};
      if (!r.at("value").is_null()) cell.value = r.at("value").get<double>();
      report.rollups.push_back(std::move(cell));
    }
    report.exclusions = j.value("exclusions", std::vector<std::string>{});
    report.failures = j.value("failures", std::vector<std::string>{});
    report.notes = j.value("notes", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("report: ") + e.what());
  }
  return report;
}

}  // namespace polysel
