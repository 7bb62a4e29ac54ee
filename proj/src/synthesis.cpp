#include "conceptsynth/synthesis.hpp"

#include <spdlog/spdlog.h>

#include <cctype>

#include "conceptsynth/error.hpp"
#include "conceptsynth/hashing.hpp"
#include "conceptsynth/text.hpp"

namespace csynth {
namespace {

std::string join_window(const std::vector<std::string>& tokens, std::size_t start, std::size_t len) {
  std::string out;
  for (std::size_t i = start; i < start + len; ++i) {
    if (i > start) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

GenerationResult complete_nonempty(const std::string& prompt, Task task, Backend& backend) {
  GenerationResult result;
  const int attempts = std::max(1, backend.descriptor().params.max_attempts);
  try {
    for (int i = 0; i < attempts; ++i) {
      const auto ex = backend.complete(prompt, for_task(task));
      result.usage += ex.usage();
      std::string text = trim(ex.output);
      if (!text.empty()) {
        result.text = std::move(text);
        return result;
      }
    }
    result.failure = "empty output after " + std::to_string(attempts) + " attempts";
  } catch (const BackendError& e) {
    result.failure = e.what();
  }
  return result;
}

}  // namespace

std::string render_problem_prompt(const std::vector<std::string>& concept_texts, const PromptLibrary& prompts) {
  const std::size_t arity = concept_texts.size();
  if (arity < 2 || arity > 4) {
    throw ValidationError("combination arity " + std::to_string(arity) + " is out of range (2..4)");
  }
  const std::string name = problem_template_name(arity);
  if (!prompts.has(name)) throw ConfigError("no problem template for arity " + std::to_string(arity));
  std::map<std::string, std::string> vars;
  for (std::size_t i = 0; i < arity; ++i) vars["concept_" + std::to_string(i + 1)] = concept_texts[i];
  return prompts.render(name, vars);
}

std::string canonicalize_question(std::string_view question) {
  std::string s = collapse_whitespace(ascii_lower(question));
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back()))) s.pop_back();
  return trim(s);
}

std::string question_hash(std::string_view question) { return sha256_hex(canonicalize_question(question)); }

GenerationResult generate_problem(const std::vector<std::string>& concept_texts, Backend& generator,
                                  const PromptLibrary& prompts) {
  return complete_nonempty(render_problem_prompt(concept_texts, prompts), Task::kGenerateProblem, generator);
}

bool QuestionDeduper::admit(std::string_view question) {
  const std::string h = question_hash(question);
  std::lock_guard lock(mu_);
  if (seen_.insert(h).second) return true;
  ++dropped_;
  return false;
}

std::size_t QuestionDeduper::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

DifficultyRating parse_difficulty_rating(std::string_view output) {
  DifficultyRating r;
  r.raw_output = std::string(output);
  const auto choice = parse_last_choice(output, {"low", "medium", "high"});
  if (!choice) {
    r.level = Difficulty::kHigh;
    r.review_flag = true;
    return r;
  }
  r.level = parse_difficulty(*choice);
  return r;
}

DifficultyRating rate_difficulty(const std::string& question, Backend& rater, const PromptLibrary& prompts,
                                 TokenUsage* usage) {
  if (trim(question).empty()) throw ValidationError("rate_difficulty: question is empty");
  const auto ex = rater.complete(prompts.render(prompt_names::kRateDifficulty, {{"question", question}}),
                                 for_task(Task::kRateDifficulty));
  if (usage) *usage += ex.usage();
  auto rating = parse_difficulty_rating(ex.output);
  if (rating.review_flag) spdlog::warn("unparseable difficulty rating, routing to the large solver");
  return rating;
}

Role route_solver(Difficulty level) {
  switch (level) {
    case Difficulty::kLow:
    case Difficulty::kMedium:
      return Role::kSolverSmall;
    case Difficulty::kHigh:
      return Role::kSolverLarge;
  }
  return Role::kSolverLarge;
}

BackendPtr select_solver(Difficulty level, const BackendPtr& solver_small, const BackendPtr& solver_large) {
  const Role role = route_solver(level);
  const BackendPtr& chosen = role == Role::kSolverSmall ? solver_small : solver_large;
  if (!chosen) throw ConfigError("no backend configured for role " + std::string(to_string(role)));
  return chosen;
}

GenerationResult generate_solution(const std::string& question, Backend& solver, const PromptLibrary& prompts) {
  if (trim(question).empty()) throw ValidationError("generate_solution: question is empty");
  return complete_nonempty(prompts.render(prompt_names::kSolve, {{"question", question}}), Task::kSolve, solver);
}

SeedLeakScanner::SeedLeakScanner(const std::vector<std::string>& seed_texts, std::size_t window) : window_(window) {
  if (window_ == 0) throw ValidationError("leak window must be positive");
  for (const auto& text : seed_texts) {
    const auto tokens = normalized_tokens(text);
    for (std::size_t i = 0; i + window_ <= tokens.size(); ++i) windows_.insert(join_window(tokens, i, window_));
  }
}

std::optional<std::string> SeedLeakScanner::find_leak(std::string_view text) const {
  const auto tokens = normalized_tokens(text);
  for (std::size_t i = 0; i + window_ <= tokens.size(); ++i) {
    auto w = join_window(tokens, i, window_);
    if (windows_.contains(w)) return w;
  }
  return std::nullopt;
}

}  // namespace csynth
