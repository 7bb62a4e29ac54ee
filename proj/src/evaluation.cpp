#include "conceptsynth/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "conceptsynth/error.hpp"
#include "conceptsynth/store.hpp"
#include "conceptsynth/text.hpp"

namespace csynth {
namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

JudgePanel::JudgePanel(const std::vector<BackendPtr>& judges) {
  for (const auto& b : judges) {
    if (!b) throw ConfigError("null judge backend");
    const auto& d = b->descriptor();
    if (d.role != Role::kJudge || !d.judge_weight) throw ConfigError("backend " + d.backend_id + " is not a weighted judge");
    judges_.push_back({d.backend_id, *d.judge_weight, 0.0, b});
  }
  normalize();
}

JudgePanel::JudgePanel(const std::vector<std::pair<std::string, double>>& weights) {
  for (const auto& [id, w] : weights) judges_.push_back({id, w, 0.0, nullptr});
  normalize();
}

void JudgePanel::normalize() {
  if (judges_.empty()) throw ConfigError("judge panel needs at least one judge");
  std::set<std::string> ids;
  double total = 0.0;
  for (const auto& j : judges_) {
    if (!ids.insert(j.id).second) throw ConfigError("duplicate judge id " + j.id);
    if (!std::isfinite(j.raw_weight) || j.raw_weight < 0.0) throw ConfigError("judge " + j.id + " has an invalid weight");
    total += j.raw_weight;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw ConfigError("judge weights are all zero");
  for (auto& j : judges_) j.weight = j.raw_weight / total;
}

std::vector<double> JudgePanel::normalized_weights() const {
  std::vector<double> out;
  for (const auto& j : judges_) out.push_back(j.weight);
  return out;
}

JudgeScore parse_problem_score(std::string_view output) {
  const auto n = parse_last_number(output);
  if (!n || !std::isfinite(*n)) return {0.0, true};
  return {std::clamp(*n, 0.0, 1.0), false};
}

std::pair<int, bool> parse_solution_vote(std::string_view output) {
  const auto v = parse_last_yes_no(output);
  if (!v) return {0, true};
  return {*v ? 1 : 0, false};
}

PanelScores score_problem(const std::string& question, const std::vector<std::string>& concept_texts,
                          CombinationKind kind, const JudgePanel& panel, const PromptLibrary& prompts,
                          std::size_t max_in_flight) {
  if (trim(question).empty()) throw ValidationError("score_problem: question is empty");
  const std::string prompt = prompts.render(
      prompt_names::kScoreProblem,
      {{"question", question}, {"concepts", join(concept_texts, "; ")}, {"relationship", std::string(to_string(kind))}});

  std::vector<std::function<CompletionExchange()>> requests;
  for (const auto& judge : panel.judges()) {
    if (!judge.backend) throw ConfigError("judge " + judge.id + " has no backend");
    requests.emplace_back([&prompt, b = judge.backend] { return b->complete(prompt, for_task(Task::kScoreProblem)); });
  }
  const auto results = run_bounded(requests, max_in_flight);

  PanelScores out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& id = panel.judges()[i].id;
    if (!results[i].ok()) {
      spdlog::warn("judge {} failed to score a problem: {}", id, results[i].error_message);
      out.scores[id] = 0.0;
      out.review_flags.push_back("score_failed:" + id);
      continue;
    }
    out.usage += results[i].value->usage();
    const auto s = parse_problem_score(results[i].value->output);
    out.scores[id] = s.score;
    if (s.review_flag) out.review_flags.push_back("score_unparseable:" + id);
  }
  return out;
}

bool accept_weighted_score(double weighted_score, double threshold) { return weighted_score >= threshold; }

ProblemVerdict weighted_problem_verdict(const std::map<std::string, double>& scores, const JudgePanel& panel,
                                        double threshold) {
  double total = 0.0;
  for (const auto& judge : panel.judges()) {
    const auto it = scores.find(judge.id);
    if (it == scores.end()) throw ValidationError("no score from judge " + judge.id);
    total += judge.weight * it->second;
  }
  total = std::clamp(total, 0.0, 1.0);
  return {total, accept_weighted_score(total, threshold)};
}

PanelVotes vote_solution(const std::string& question, const std::string& solution, const JudgePanel& panel,
                         const PromptLibrary& prompts, std::size_t max_in_flight) {
  if (trim(solution).empty()) throw ValidationError("vote_solution: solution is empty");
  const std::string prompt = prompts.render(prompt_names::kVoteSolution, {{"question", question}, {"solution", solution}});

  std::vector<std::function<CompletionExchange()>> requests;
  for (const auto& judge : panel.judges()) {
    if (!judge.backend) throw ConfigError("judge " + judge.id + " has no backend");
    requests.emplace_back([&prompt, b = judge.backend] { return b->complete(prompt, for_task(Task::kVoteSolution)); });
  }
  const auto results = run_bounded(requests, max_in_flight);

  PanelVotes out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& id = panel.judges()[i].id;
    if (!results[i].ok()) {
      spdlog::warn("judge {} failed to vote on a solution: {}", id, results[i].error_message);
      out.votes[id] = 0;
      out.review_flags.push_back("vote_failed:" + id);
      continue;
    }
    out.usage += results[i].value->usage();
    const auto [vote, flagged] = parse_solution_vote(results[i].value->output);
    out.votes[id] = vote;
    if (flagged) out.review_flags.push_back("vote_unparseable:" + id);
  }
  return out;
}

bool veto_decision(std::span<const int> votes) {
  if (votes.empty()) throw ValidationError("veto_decision: no votes");
  return std::all_of(votes.begin(), votes.end(), [](int v) { return v == 1; });
}

bool veto_decision(const std::map<std::string, int>& votes) {
  std::vector<int> v;
  for (const auto& [id, vote] : votes) v.push_back(vote);
  return veto_decision(std::span<const int>(v));
}

bool ensemble_qualified(const ProblemVerdict& problem, const std::map<std::string, int>& votes) {
  return problem.accepted && !votes.empty() && veto_decision(votes);
}

void to_json(json& j, const GoldLabel& g) { j = json{{"item_id", g.item_id}, {"qualified", g.qualified}}; }

void from_json(const json& j, GoldLabel& g) {
  try {
    g.item_id = j.at("item_id").get<std::string>();
    g.qualified = j.at("qualified").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed gold label: ") + e.what());
  }
}

std::vector<GoldLabel> load_gold_labels(const std::filesystem::path& path) {
  auto labels = read_records<GoldLabel>(path);
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l.item_id).second) throw ValidationError("duplicate gold label for " + l.item_id);
  }
  return labels;
}

double ensemble_accuracy(const std::map<std::string, bool>& verdicts, const std::vector<GoldLabel>& gold) {
  if (gold.empty()) throw ValidationError("ensemble_accuracy: gold set is empty");
  std::vector<std::string> missing;
  std::size_t matches = 0;
  for (const auto& g : gold) {
    const auto it = verdicts.find(g.item_id);
    if (it == verdicts.end()) {
      missing.push_back(g.item_id);
      continue;
    }
    if (it->second == g.qualified) ++matches;
  }
  if (!missing.empty()) throw ValidationError("no ensemble verdict for: " + join(missing, ", "));
  return static_cast<double>(matches) / static_cast<double>(gold.size());
}

}  // namespace csynth
