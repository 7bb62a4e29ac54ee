#include "conceptsynth/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "conceptsynth/error.hpp"

namespace csynth {
namespace {

constexpr const char* kExtractBody =
    R"(Read the mathematics problem and worked solution below and list the key mathematical concepts they rely on, between 1 and 5 of them.
Rules:
1. Name each concept with standard mathematical terminology, not everyday wording.
2. List a concept only if the problem and the solution actually use or cite it. Leave out anything merely mentioned in passing.
3. Prefer the specific result over the broad area: a named theorem, formula, property or standard technique rather than a branch of mathematics.
4. One concept per entry. Do not bundle several results into one entry and do not list the same concept twice under different names.
5. List facts, not procedures. Skip descriptions of steps, general skills and problem-solving advice.

Answer with a numbered list, one concept per line, and nothing else.

Problem:
{question}

Solution:
{solution}
)";

constexpr const char* kReviewBody =
    R"(You are auditing a candidate mathematical knowledge point for a concept library.
Knowledge point: "{concept}"

Classify it into exactly one category:
- vague: too broad or generic to guide problem writing
- incorrect: states something mathematically false
- overly_detailed: describes a specific problem instance rather than a reusable concept
- ok: a precise, correct, reusable knowledge point

Reply with the category name alone on the final line.
)";

constexpr const char* kSynonymBody =
    R"(Decide whether two mathematical knowledge points name the same concept.
Knowledge point A: "{concept_a}"
Knowledge point B: "{concept_b}"

Answer YES if they are interchangeable names for one concept, NO if they are different concepts.
Reply with YES or NO alone on the final line.
)";

constexpr const char* kRepresentativeBody =
    R"(The following knowledge points were grouped as expressing the same mathematical concept.
Members:
{members}

Reply with the number of the member that best represents the group.
If none of them is suitable, reply with NEW: followed by a better name for the concept.
)";

constexpr const char* kRateBody =
    R"(Rate the difficulty of the following mathematics problem.

Problem:
{question}

Reply with one word on the final line: low, medium, or high.
)";

constexpr const char* kSolveBody =
    R"(Solve the following mathematics problem. Show complete step-by-step reasoning and state the final answer clearly.

Problem:
{question}
)";

constexpr const char* kScoreBody =
    R"(Evaluate the quality of a synthesized mathematics problem.
Key concepts: {concepts}
Concept relationship: {relationship}

Problem:
{question}

Check two things:
1. Soundness: the problem contains no mathematical mistakes and genuinely uses the key concepts.
2. Presentation: the statement is clear and complete, and gives away neither hints nor the answer.

Reply with a single score between 0 and 1 on the final line.
)";

constexpr const char* kVoteBody =
    R"(Check whether the solution below is mathematically correct and fully addresses every part of the problem.

Problem:
{question}

Solution:
{solution}

Reply with YES or NO alone on the final line.
)";

constexpr const char* kRequirementsTail =
    R"(1. Weave all {count} concepts into one scenario, mathematical or practical. Separate sub-questions that each use one concept do not count.
2. The statement must be mathematically correct and unambiguous, with every condition needed to solve it.
3. Aim for a genuinely challenging problem that tests combined use of the concepts.
4. The setting may be realistic or inventive but must read naturally. Other concepts may appear where the problem needs them.
5. Keep the wording short and well organized, with no irrelevant detail.
6. There must be exactly one correct answer or one clear line of solution.
7. Pick whatever format suits the concepts, such as an open answer, a proof, a short answer or a multiple-choice question.

Output only the problem statement.
)";

std::string problem_body(std::size_t arity) {
  static const char* kCountWords[] = {"", "", "two", "three", "four"};
  std::string head = "Write a new mathematics problem that combines ";
  for (std::size_t i = 1; i <= arity; ++i) {
    if (i > 1) head += (i == arity) ? (arity == 2 ? " and " : ", and ") : ", ";
    head += "\"{concept_" + std::to_string(i) + "}\"";
  }
  head += ". Requirements:\n";
  std::string tail = kRequirementsTail;
  const std::string key = "{count}";
  tail.replace(tail.find(key), key.size(), kCountWords[arity]);
  return head + tail;
}

struct VarSpec {
  std::set<std::string> required;
  std::set<std::string> allowed;
};

const std::map<std::string, VarSpec, std::less<>>& template_vars() {
  static const std::map<std::string, VarSpec, std::less<>> kVars{
      {std::string(prompt_names::kExtractConcepts), {{"question"}, {"question", "solution"}}},
      {std::string(prompt_names::kReviewConcept), {{"concept"}, {"concept"}}},
      {std::string(prompt_names::kConfirmSynonym), {{"concept_a", "concept_b"}, {"concept_a", "concept_b"}}},
      {std::string(prompt_names::kChooseRepresentative), {{"members"}, {"members"}}},
      {std::string(prompt_names::kRateDifficulty), {{"question"}, {"question"}}},
      {std::string(prompt_names::kSolve), {{"question"}, {"question"}}},
      {std::string(prompt_names::kScoreProblem), {{"question"}, {"question", "concepts", "relationship"}}},
      {std::string(prompt_names::kVoteSolution), {{"question", "solution"}, {"question", "solution"}}},
  };
  return kVars;
}

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

std::string problem_template_name(std::size_t arity) { return "problem_" + std::to_string(arity); }

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < body.size() && is_ident_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) {
      std::string name(body.substr(i + 1, j - i - 1));
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(std::move(name));
      i = j;
    }
  }
  return out;
}

std::string render_template(std::string_view body, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(body.size() + 256);
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '{') {
      std::size_t j = i + 1;
      while (j < body.size() && is_ident_char(body[j])) ++j;
      if (j < body.size() && body[j] == '}' && j > i + 1) {
        const std::string name(body.substr(i + 1, j - i - 1));
        auto it = vars.find(name);
        if (it == vars.end()) throw ConfigError("template variable {" + name + "} has no value");
        out += it->second;
        i = j;
        continue;
      }
    }
    out.push_back(body[i]);
  }
  return out;
}

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary lib;
  lib.set({std::string(prompt_names::kExtractConcepts), kExtractBody});
  lib.set({std::string(prompt_names::kReviewConcept), kReviewBody});
  lib.set({std::string(prompt_names::kConfirmSynonym), kSynonymBody});
  lib.set({std::string(prompt_names::kChooseRepresentative), kRepresentativeBody});
  lib.set({std::string(prompt_names::kRateDifficulty), kRateBody});
  lib.set({std::string(prompt_names::kSolve), kSolveBody});
  lib.set({std::string(prompt_names::kScoreProblem), kScoreBody});
  lib.set({std::string(prompt_names::kVoteSolution), kVoteBody});
  for (std::size_t arity = 2; arity <= 4; ++arity) lib.set({problem_template_name(arity), problem_body(arity)});
  return lib;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& dir) {
  PromptLibrary lib = defaults();
  if (!std::filesystem::is_directory(dir)) throw ConfigError("templates directory " + dir.string() + " not found");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    const std::string name = entry.path().stem().string();
    if (!lib.has(name)) throw ConfigError("unknown template file " + entry.path().string());
    std::ifstream in(entry.path());
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.set({name, ss.str()});
  }
  lib.validate();
  return lib;
}

const PromptTemplate& PromptLibrary::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("no template named " + std::string(name));
  return it->second;
}

bool PromptLibrary::has(std::string_view name) const { return templates_.find(name) != templates_.end(); }

void PromptLibrary::set(PromptTemplate t) {
  const std::string key = t.template_id;
  templates_.insert_or_assign(key, std::move(t));
}

void PromptLibrary::validate() const {
  for (const auto& [name, t] : templates_) {
    const auto found = placeholders(t.body);
    const std::set<std::string> have(found.begin(), found.end());
    if (name.rfind("problem_", 0) == 0) {
      const std::size_t arity = std::stoul(name.substr(8));
      std::set<std::string> want;
      for (std::size_t i = 1; i <= arity; ++i) want.insert("concept_" + std::to_string(i));
      if (have != want) {
        throw ConfigError("template " + name + " must contain exactly {concept_1}..{concept_" + std::to_string(arity) +
                          "}");
      }
      continue;
    }
    auto it = template_vars().find(name);
    if (it == template_vars().end()) continue;
    for (const auto& r : it->second.required) {
      if (!have.contains(r)) throw ConfigError("template " + name + " is missing placeholder {" + r + "}");
    }
    for (const auto& h : have) {
      if (!it->second.allowed.contains(h)) throw ConfigError("template " + name + " uses unknown placeholder {" + h + "}");
    }
  }
}

std::string PromptLibrary::render(std::string_view name, const std::map<std::string, std::string>& vars) const {
  return render_template(get(name).body, vars);
}

}  // namespace csynth
