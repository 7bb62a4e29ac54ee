#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "conceptsynth/store.hpp"
#include "conceptsynth/synthesis.hpp"

using namespace csynth;
using nlohmann::json;

namespace {

BackendPtr backend(Role role, const std::string& id, json mock = json::object()) {
  BackendDescriptor d;
  d.backend_id = id;
  d.role = role;
  d.model_name = id;
  d.mock = std::move(mock);
  return make_backend(d);
}

}  // namespace

TEST_CASE("problem prompts carry the concepts and nothing else") {
  const auto prompts = PromptLibrary::defaults();
  const auto p2 = render_problem_prompt({"Law of sines", "Ratios"}, prompts);
  CHECK(p2.find("Law of sines") != std::string::npos);
  CHECK(p2.find("Ratios") != std::string::npos);
  CHECK(p2.find('{') == std::string::npos);

  const auto p4 = render_problem_prompt({"A", "B", "C", "D"}, prompts);
  for (const char* c : {"\"A\"", "\"B\"", "\"C\"", "\"D\""}) CHECK(p4.find(c) != std::string::npos);

  CHECK_THROWS_AS(render_problem_prompt({"A"}, prompts), ValidationError);
  CHECK_THROWS_AS(render_problem_prompt({"A", "B", "C", "D", "E"}, prompts), ValidationError);

  // Braces in concept text stay literal.
  const auto braces = render_problem_prompt({"{concept_2}", "Sets"}, prompts);
  CHECK(braces.find("{concept_2}") != std::string::npos);
}

TEST_CASE("custom problem templates must match their arity") {
  auto prompts = PromptLibrary::defaults();
  prompts.set({"problem_3", "Use {concept_1} and {concept_2}."});
  CHECK_THROWS_AS(prompts.validate(), ConfigError);
  prompts.set({"problem_3", "Use {concept_1}, {concept_2} and {concept_3}."});
  CHECK_NOTHROW(prompts.validate());
}

TEST_CASE("exact duplicate questions are dropped after canonicalization") {
  QuestionDeduper d;
  CHECK(d.admit("Find x if 2x = 4."));
  CHECK_FALSE(d.admit("  find X   if 2x = 4"));
  CHECK(d.admit("Find x if 2x = 6."));
  CHECK(d.dropped() == 1);
  CHECK(canonicalize_question("What  IS it?!") == "what is it");
  CHECK(question_hash("a b") == question_hash("A  b."));
}

TEST_CASE("difficulty parsing and routing") {
  CHECK(parse_difficulty_rating("Difficulty: low").level == Difficulty::kLow);
  CHECK(parse_difficulty_rating("I'd say MEDIUM").level == Difficulty::kMedium);
  const auto garbage = parse_difficulty_rating("no idea");
  CHECK(garbage.level == Difficulty::kHigh);
  CHECK(garbage.review_flag);
  CHECK(route_solver(Difficulty::kLow) == Role::kSolverSmall);
  CHECK(route_solver(Difficulty::kMedium) == Role::kSolverSmall);
  CHECK(route_solver(Difficulty::kHigh) == Role::kSolverLarge);

  auto small = backend(Role::kSolverSmall, "small");
  auto large = backend(Role::kSolverLarge, "large");
  CHECK(select_solver(Difficulty::kLow, small, large) == small);
  CHECK(select_solver(Difficulty::kHigh, small, large) == large);
  CHECK_THROWS_AS(select_solver(Difficulty::kHigh, small, nullptr), ConfigError);

  auto rater = backend(Role::kRater, "r", {{"fixed", {{"rate_difficulty", "Difficulty: medium"}}}});
  TokenUsage u;
  CHECK(rate_difficulty("Find x.", *rater, PromptLibrary::defaults(), &u).level == Difficulty::kMedium);
  CHECK(u.calls == 1);
}

TEST_CASE("generation failures come back as values") {
  const auto prompts = PromptLibrary::defaults();
  auto ok = backend(Role::kGenerator, "g");
  const auto r = generate_problem({"Ratios", "Proportions"}, *ok, prompts);
  REQUIRE(r.text);
  CHECK(r.text->find("Ratios") != std::string::npos);

  auto empty = backend(Role::kGenerator, "e", {{"fixed", {{"generate_problem", "   "}}}});
  const auto e = generate_problem({"Ratios", "Proportions"}, *empty, prompts);
  CHECK_FALSE(e.text);
  CHECK_FALSE(e.failure.empty());

  auto down = backend(Role::kGenerator, "d", {{"rules", {{{"fail", true}}}}});
  const auto f = generate_problem({"Ratios", "Proportions"}, *down, prompts);
  CHECK_FALSE(f.text);
  CHECK_FALSE(f.failure.empty());
}

TEST_CASE("seed leak scanner") {
  const std::string seed =
      "A ladder of length ten leans against a vertical wall so that its foot is six units from the base of the wall";
  SeedLeakScanner s({seed}, 8);
  CHECK(s.find_leak("Consider this: a ladder of length ten leans against a vertical wall. Done."));
  CHECK_FALSE(s.find_leak("A ladder leans on a wall; how high does it reach?"));
  CHECK_THROWS_AS(SeedLeakScanner({seed}, 0), ValidationError);
}

TEST_CASE("toy problem prompts never contain seed text") {
  const auto seeds = load_seed_corpus(CSYNTH_TOY_DIR "/toy_corpus.jsonl");
  std::vector<std::string> texts;
  for (const auto& s : seeds) {
    texts.push_back(s.question);
    texts.push_back(s.solution);
  }
  SeedLeakScanner scanner(texts, 6);
  const auto prompts = PromptLibrary::defaults();
  const std::vector<std::vector<std::string>> combos{{"Pythagorean theorem", "Law of sines"},
                                                     {"Ratios", "Systems of linear equations", "Area of a triangle"},
                                                     {"Prime factorization", "Divisibility rules", "Ratios", "Percentages"}};
  for (const auto& c : combos) {
    const auto prompt = render_problem_prompt(c, prompts);
    CHECK_FALSE(scanner.find_leak(prompt));
  }
}
