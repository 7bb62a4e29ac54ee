#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "conceptsynth/error.hpp"
#include "conceptsynth/store.hpp"
#include "test_util.hpp"

using namespace csynth;
using testutil::TempDir;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("seed corpus loading") {
  TempDir dir;
  testutil::write_text(dir / "ok.jsonl",
                       "{\"id\":\"p1\",\"question\":\"What is 2+2?\",\"solution\":\"4\"}\n"
                       "\n"
                       "{\"question\":\"Name a prime.\",\"solution\":\"7\"}\n");
  const auto seeds = load_seed_corpus(dir / "ok.jsonl");
  REQUIRE(seeds.size() == 2);
  CHECK(seeds[0].id == "p1");
  CHECK(seeds[1].id == seed_content_id("Name a prime.", "7"));
  CHECK(seeds[1].id.rfind("seed-", 0) == 0);

  testutil::write_text(dir / "dup.jsonl",
                       "{\"id\":\"p1\",\"question\":\"a\",\"solution\":\"\"}\n"
                       "{\"id\":\"p2\",\"question\":\"b\",\"solution\":\"\"}\n"
                       "{\"id\":\"p1\",\"question\":\"c\",\"solution\":\"\"}\n");
  const auto dup = error_of([&] { load_seed_corpus(dir / "dup.jsonl"); });
  CHECK(dup.find("\"p1\"") != std::string::npos);
  CHECK(dup.find("lines 1 and 3") != std::string::npos);

  testutil::write_text(dir / "missing.jsonl", "{\"id\":\"p1\",\"solution\":\"x\"}\n");
  const auto missing = error_of([&] { load_seed_corpus(dir / "missing.jsonl"); });
  CHECK(missing.find("question") != std::string::npos);
  CHECK(missing.find("line 1") != std::string::npos);

  testutil::write_text(dir / "blank.jsonl", "{\"id\":\"p1\",\"question\":\"  \",\"solution\":\"x\"}\n");
  CHECK_THROWS_AS(load_seed_corpus(dir / "blank.jsonl"), ValidationError);

  testutil::write_text(dir / "garbage.jsonl", "{\"id\":\"p1\",\"question\":\"q\",\"solution\":\"s\"}\nnot json\n");
  CHECK(error_of([&] { load_seed_corpus(dir / "garbage.jsonl"); }).find("line 2") != std::string::npos);

  CHECK_THROWS(load_seed_corpus(dir / "absent.jsonl"));
}

TEST_CASE("checkpoint round trip and atomic replacement") {
  TempDir dir;
  const auto path = dir / "stage.checkpoint.json";
  const StageCheckpoint first{"generate", {"a", "b"}, "fp1"};
  write_checkpoint(first, path);
  CHECK(read_checkpoint(path) == first);

  // A crash after the temp file is durable but before the rename leaves the old checkpoint.
  const StageCheckpoint second{"generate", {"a", "b", "c"}, "fp1"};
  CHECK_THROWS(atomic_write_file(path, nlohmann::json(second).dump(), [] { throw std::runtime_error("power loss"); }));
  CHECK(read_checkpoint(path) == first);

  write_checkpoint(second, path);
  CHECK(read_checkpoint(path) == second);
  CHECK_FALSE(read_checkpoint(dir / "none.json").has_value());
}

TEST_CASE("resumption requires a matching fingerprint") {
  const StageCheckpoint ckpt{"generate", {"b"}, "fp-old"};
  CHECK_THROWS_AS(require_resumable(ckpt, "fp-new"), CheckpointError);
  const auto msg = error_of([&] { select_resumable_work({"a", "b"}, ckpt, "fp-new"); });
  CHECK(msg.find("restart") != std::string::npos);
}

TEST_CASE("pending work is the sorted set difference") {
  const std::vector<std::string> all{"c", "a", "b"};
  CHECK(select_resumable_work(all, {"s", {"b"}, "fp"}, "fp") == std::vector<std::string>{"a", "c"});
  CHECK(select_resumable_work(all, {"s", {}, "fp"}, "fp") == std::vector<std::string>{"a", "b", "c"});
  CHECK(select_resumable_work(all, {"s", {"a", "b", "c"}, "fp"}, "fp").empty());
}

TEST_CASE("property: records survive a write/read round trip") {
  TempDir dir;
  std::mt19937_64 rng(3);
  const std::vector<std::string> words{"alpha", "ünïcode", "quote\"d", "back\\slash", "tab\tbed", "new\nline", ""};
  auto pick = [&] { return words[rng() % words.size()]; };
  for (int round = 0; round < 50; ++round) {
    std::vector<SynthesizedItem> items;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      SynthesizedItem it;
      it.id = "item-" + std::to_string(round) + "-" + std::to_string(i);
      it.combination_id = "cmb-" + pick();
      it.kind = static_cast<CombinationKind>(rng() % 4);
      it.concept_ids = {"kc-" + pick(), "kc-x"};
      it.concept_texts = {pick(), pick()};
      it.question = pick() + " question";
      if (rng() % 2) {
        it.problem_scores = {{"j1", static_cast<double>(rng() % 1000) / 999.0}, {"j2", 0.5}};
        it.weighted_score = 0.75;
        it.status = ItemStatus::kProblemAccepted;
        if (rng() % 2) {
          it.difficulty = static_cast<Difficulty>(rng() % 3);
          it.solution = pick();
          it.solution_votes = {{"j1", 1}, {"j2", static_cast<int>(rng() % 2)}};
          it.status = ItemStatus::kSolutionRejected;
        }
      }
      it.review_flags = {pick()};
      it.validate();
      items.push_back(it);
    }
    write_records(dir / "items.jsonl", items);
    CHECK(read_records<SynthesizedItem>(dir / "items.jsonl") == items);

    StageCheckpoint ckpt{"s" + pick(), {}, "fp"};
    for (int i = 0; i < static_cast<int>(rng() % 10); ++i) ckpt.completed_item_ids.insert(pick() + std::to_string(i));
    write_checkpoint(ckpt, dir / "c.json");
    CHECK(read_checkpoint(dir / "c.json") == ckpt);
  }
}

TEST_CASE("item invariants") {
  SynthesizedItem it;
  it.id = "x";
  it.question = "q";
  it.weighted_score = 0.9;
  CHECK_THROWS_AS(it.validate(), ValidationError);
  it.problem_scores = {{"j", 0.9}};
  CHECK_NOTHROW(it.validate());
  it.solution_votes = {{"j", 1}};
  it.status = ItemStatus::kGenerated;
  CHECK_THROWS_AS(it.validate(), ValidationError);
  it.status = ItemStatus::kSolutionAccepted;
  CHECK_NOTHROW(it.validate());

  CHECK(is_forward_transition(ItemStatus::kGenerated, ItemStatus::kProblemAccepted));
  CHECK(is_forward_transition(ItemStatus::kProblemAccepted, ItemStatus::kSolutionAccepted));
  CHECK_FALSE(is_forward_transition(ItemStatus::kSolutionAccepted, ItemStatus::kGenerated));
  CHECK_FALSE(is_forward_transition(ItemStatus::kProblemRejected, ItemStatus::kSolutionAccepted));
}

TEST_CASE("journal ignores a torn tail and the run lock is exclusive") {
  TempDir dir;
  const Journal j(dir / "j.jsonl");
  j.append({{{"id", "a"}}, {{"id", "b"}}});
  {
    std::ofstream out(dir / "j.jsonl", std::ios::app);
    out << "{\"id\":\"c";
  }
  const auto recs = j.read_all();
  REQUIRE(recs.size() == 2);
  CHECK(recs[1]["id"] == "b");

  const RunLock lock(dir.path());
  CHECK_THROWS_AS(RunLock(dir.path()), StorageError);
}
