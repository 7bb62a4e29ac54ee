#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace csynth {

// Template names. Problem-generation templates are keyed by arity: problem_2, problem_3, problem_4.
namespace prompt_names {
inline constexpr std::string_view kExtractConcepts = "extract_concepts";
inline constexpr std::string_view kReviewConcept = "review_concept";
inline constexpr std::string_view kConfirmSynonym = "confirm_synonym";
inline constexpr std::string_view kChooseRepresentative = "choose_representative";
inline constexpr std::string_view kRateDifficulty = "rate_difficulty";
inline constexpr std::string_view kSolve = "solve";
inline constexpr std::string_view kScoreProblem = "score_problem";
inline constexpr std::string_view kVoteSolution = "vote_solution";
}  // namespace prompt_names

std::string problem_template_name(std::size_t arity);

struct PromptTemplate {
  std::string template_id;
  std::string body;
};

// Placeholders (`{name}`) appearing in a template body, in first-occurrence order.
std::vector<std::string> placeholders(std::string_view body);

// Substitutes every `{name}` with vars[name]. Values are inserted verbatim, never re-expanded.
// Throws ConfigError when the body references a variable that was not supplied.
std::string render_template(std::string_view body, const std::map<std::string, std::string>& vars);

class PromptLibrary {
 public:
  // Built-in templates for every step.
  static PromptLibrary defaults();

  // Defaults overridden by `<name>.txt` files found in `dir`. Overrides are validated.
  static PromptLibrary load(const std::filesystem::path& dir);

  const PromptTemplate& get(std::string_view name) const;
  bool has(std::string_view name) const;
  void set(PromptTemplate t);

  // Problem templates must carry exactly {concept_1}..{concept_arity}; other templates must carry
  // the variables their step supplies. Throws ConfigError.
  void validate() const;

  std::string render(std::string_view name, const std::map<std::string, std::string>& vars) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace csynth
