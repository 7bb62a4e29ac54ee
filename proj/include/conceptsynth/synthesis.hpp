#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "conceptsynth/backends.hpp"
#include "conceptsynth/prompts.hpp"
#include "conceptsynth/types.hpp"

namespace csynth {

// Fills the arity-matched problem template with the concept phrases. Only concept text reaches the
// prompt, never seed questions or solutions. Arity must be 2..4.
std::string render_problem_prompt(const std::vector<std::string>& concept_texts, const PromptLibrary& prompts);

// Lowercase, collapse whitespace, strip trailing punctuation.
std::string canonicalize_question(std::string_view question);
std::string question_hash(std::string_view question);

struct GenerationResult {
  std::optional<std::string> text;
  std::string failure;  // set when text is empty
  TokenUsage usage;
};

// Asks the generator for a problem. Empty replies are retried up to max_attempts; transport
// failures after retries and persistent empty replies come back as a failure, never a throw.
GenerationResult generate_problem(const std::vector<std::string>& concept_texts, Backend& generator,
                                  const PromptLibrary& prompts);

// Exact-duplicate filter over canonical question hashes. Thread-safe; feed it in a deterministic
// order to get deterministic survivors.
class QuestionDeduper {
 public:
  // True if the question is new; false (and counted) if an identical one was admitted before.
  bool admit(std::string_view question);
  std::size_t dropped() const;

 private:
  mutable std::mutex mu_;
  std::unordered_set<std::string> seen_;
  std::size_t dropped_ = 0;
};

struct DifficultyRating {
  Difficulty level = Difficulty::kHigh;
  std::string raw_output;
  bool review_flag = false;  // unparseable reply, defaulted to high
};

DifficultyRating parse_difficulty_rating(std::string_view output);
DifficultyRating rate_difficulty(const std::string& question, Backend& rater, const PromptLibrary& prompts,
                                 TokenUsage* usage = nullptr);

// low and medium go to the small solver, high to the large one.
Role route_solver(Difficulty level);
BackendPtr select_solver(Difficulty level, const BackendPtr& solver_small, const BackendPtr& solver_large);

GenerationResult generate_solution(const std::string& question, Backend& solver, const PromptLibrary& prompts);

// Detects verbatim reuse of seed text: any window of `window` normalized tokens from a seed question
// that reappears in the scanned text.
class SeedLeakScanner {
 public:
  SeedLeakScanner(const std::vector<std::string>& seed_texts, std::size_t window = 15);
  std::optional<std::string> find_leak(std::string_view text) const;

 private:
  std::size_t window_;
  std::unordered_set<std::string> windows_;
};

}  // namespace csynth
