#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conceptsynth/backends.hpp"
#include "conceptsynth/prompts.hpp"
#include "conceptsynth/types.hpp"

namespace csynth {

inline constexpr double kDefaultProblemThreshold = 0.85;

// Judges with weights rescaled to sum to one.
class JudgePanel {
 public:
  struct Judge {
    std::string id;
    double raw_weight = 0.0;
    double weight = 0.0;  // normalized
    BackendPtr backend;   // null for panels used only for arithmetic
  };

  explicit JudgePanel(const std::vector<BackendPtr>& judges);
  explicit JudgePanel(const std::vector<std::pair<std::string, double>>& weights);

  const std::vector<Judge>& judges() const { return judges_; }
  std::size_t size() const { return judges_.size(); }
  std::vector<double> normalized_weights() const;

 private:
  void normalize();
  std::vector<Judge> judges_;
};

struct JudgeScore {
  double score = 0.0;
  bool review_flag = false;  // unparseable reply scored 0
};

// Last number in the reply, clamped to [0,1]; unparseable replies score 0 with a flag.
JudgeScore parse_problem_score(std::string_view output);

// 1 for YES, 0 for NO or anything unparseable.
std::pair<int, bool> parse_solution_vote(std::string_view output);

struct PanelScores {
  std::map<std::string, double> scores;
  std::vector<std::string> review_flags;
  TokenUsage usage;
};

PanelScores score_problem(const std::string& question, const std::vector<std::string>& concept_texts,
                          CombinationKind kind, const JudgePanel& panel, const PromptLibrary& prompts,
                          std::size_t max_in_flight = 8);

struct ProblemVerdict {
  double weighted_score = 0.0;
  bool accepted = false;
};

// Accept at or above the threshold; only strictly lower scores are discarded.
bool accept_weighted_score(double weighted_score, double threshold = kDefaultProblemThreshold);

ProblemVerdict weighted_problem_verdict(const std::map<std::string, double>& scores, const JudgePanel& panel,
                                        double threshold = kDefaultProblemThreshold);

struct PanelVotes {
  std::map<std::string, int> votes;
  std::vector<std::string> review_flags;
  TokenUsage usage;
};

PanelVotes vote_solution(const std::string& question, const std::string& solution, const JudgePanel& panel,
                         const PromptLibrary& prompts, std::size_t max_in_flight = 8);

// Unanimity: accepted iff every vote is 1.
bool veto_decision(std::span<const int> votes);
bool veto_decision(const std::map<std::string, int>& votes);

// Ensemble-qualified: problem accepted by the weighted score and solution passed the veto.
bool ensemble_qualified(const ProblemVerdict& problem, const std::map<std::string, int>& votes);

struct GoldLabel {
  std::string item_id;
  bool qualified = false;
};

void to_json(nlohmann::json& j, const GoldLabel& g);
void from_json(const nlohmann::json& j, GoldLabel& g);

std::vector<GoldLabel> load_gold_labels(const std::filesystem::path& path);

// Fraction of gold items whose ensemble verdict matches the human label.
double ensemble_accuracy(const std::map<std::string, bool>& verdicts, const std::vector<GoldLabel>& gold);

}  // namespace csynth
