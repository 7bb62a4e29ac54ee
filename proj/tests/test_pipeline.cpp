#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <spdlog/spdlog.h>

#include "conceptsynth/config.hpp"
#include "conceptsynth/pipeline.hpp"
#include "conceptsynth/store.hpp"
#include "test_util.hpp"

using namespace csynth;
using nlohmann::json;

namespace {

json toy_doc(const testutil::TempDir& dir) {
  spdlog::set_level(spdlog::level::err);
  auto doc = load_config_document(CSYNTH_TOY_DIR "/toy_config.json");
  doc["paths"]["run_dir"] = (dir.path() / "run").string();
  return doc;
}

void set_judges(json& doc, const json& mock) {
  for (auto& b : doc["backends"]) {
    if (b["role"] == "judge") b["mock"] = mock;
  }
}

std::size_t count_status(const std::filesystem::path& run, const std::string& status) {
  std::size_t n = 0;
  for (const auto& j : read_json_lines(run / outputs::kItems)) n += j["status"] == status ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  const auto cfg = parse_config(doc);
  CHECK(cfg.random_seed == 20241015);
  CHECK(cfg.graph.hub_fraction == 0.01);
  CHECK(cfg.evaluation.problem_threshold == 0.85);
  CHECK(cfg.analysis.ngram_sizes == std::vector<int>{8, 10, 13, 15});
  CHECK(cfg.with_role(Role::kJudge).size() == 3);
  CHECK(cfg.paths.seed_corpus.is_absolute());

  auto typo = doc;
  typo["graph"]["hub_fracton"] = 0.1;
  CHECK_THROWS_AS(parse_config(typo), ConfigError);

  auto bad = doc;
  bad["graph"]["hub_fraction"] = 1.5;
  CHECK_THROWS_AS(parse_config(bad), ConfigError);

  auto dup = doc;
  dup["backends"].push_back(dup["backends"][0]);
  CHECK_THROWS_AS(parse_config(dup), ConfigError);

  apply_override(doc, "graph.hub_fraction", "0.05");
  apply_override(doc, "paths.templates_dir", "/nowhere");
  CHECK(doc["graph"]["hub_fraction"] == 0.05);
  CHECK(doc["paths"]["templates_dir"] == "/nowhere");

  // Runtime knobs do not change the fingerprint, result-affecting keys do.
  auto a = parse_config(toy_doc(dir));
  auto b = a;
  b.runtime.max_in_flight = 1;
  b.paths.run_dir = "/elsewhere";
  CHECK(config_fingerprint(a) == config_fingerprint(b));
  b.random_seed = 1;
  CHECK(config_fingerprint(a) != config_fingerprint(b));
  CHECK(parse_config(config_to_json(a)).random_seed == a.random_seed);
}

TEST_CASE("a missing role fails preflight before any work") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  json kept = json::array();
  for (const auto& b : doc["backends"]) {
    if (b["role"] != "solver_large") kept.push_back(b);
  }
  doc["backends"] = kept;
  const auto cfg = parse_config(doc);
  run_command("extract", cfg, false);
  run_command("graph", cfg, false);
  CHECK_THROWS_AS(run_command("synthesize", cfg, false), ConfigError);
  CHECK_FALSE(std::filesystem::exists(cfg.paths.run_dir / outputs::kItems));
}

TEST_CASE("judges scoring zero reject everything, judges scoring one accept everything") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  doc["analysis"]["adherence"] = false;
  set_judges(doc, {{"fixed", {{"score_problem", "Score: 0.0"}}}});
  auto cfg = parse_config(doc);
  run_command("run-all", cfg, false);
  const auto run = cfg.paths.run_dir;
  const auto total = read_json_lines(run / outputs::kItems).size();
  CHECK(total > 0);
  CHECK(count_status(run, "solution_accepted") == 0);
  CHECK(count_status(run, "problem_rejected") == total - count_status(run, "generation_failed"));
  const auto report = json::parse(read_file(run / outputs::kReport));
  CHECK(report["synthesized_count"] == 0);

  testutil::TempDir dir2;
  doc = toy_doc(dir2);
  doc["analysis"]["adherence"] = false;
  set_judges(doc, {{"fixed", {{"score_problem", "1"}, {"vote_solution", "YES"}}}});
  cfg = parse_config(doc);
  run_command("run-all", cfg, false);
  const auto run2 = cfg.paths.run_dir;
  CHECK(count_status(run2, "solution_accepted") == read_json_lines(run2 / outputs::kItems).size());
}

TEST_CASE("a zero budget leaves no combinations") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  doc["graph"]["budget"] = 0;
  const auto cfg = parse_config(doc);
  run_command("extract", cfg, false);
  run_command("graph", cfg, false);
  CHECK(read_json_lines(cfg.paths.run_dir / outputs::kCombinations).empty());
}

TEST_CASE("backend outage aborts with a backend error") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  for (auto& b : doc["backends"]) {
    if (b["role"] == "extractor") b["mock"] = {{"rules", {{{"fail", true}}}}};
  }
  const auto cfg = parse_config(doc);
  try {
    run_command("extract", cfg, false);
    FAIL("expected a backend error");
  } catch (const Error& e) {
    CHECK(e.exit_code() == ExitCode::kBackend);
  }
}

TEST_CASE("changed config is refused until restart") {
  testutil::TempDir dir;
  auto doc = toy_doc(dir);
  run_command("extract", parse_config(doc), false);
  doc["extraction"]["same_threshold"] = 0.95;
  const auto changed = parse_config(doc);
  CHECK_THROWS_AS(run_command("extract", changed, false), CheckpointError);
  CHECK_NOTHROW(run_command("extract", changed, true));
}

TEST_CASE("stages require their predecessors") {
  testutil::TempDir dir;
  const auto cfg = parse_config(toy_doc(dir));
  CHECK_THROWS_AS(run_command("graph", cfg, false), Error);
  CHECK_THROWS_AS(run_command("bogus", cfg, false), Error);
}

TEST_CASE("interrupted runs resume to the same outputs") {
  testutil::TempDir dir_a, dir_b;
  auto doc_a = toy_doc(dir_a);
  doc_a["analysis"]["adherence"] = false;
  auto cfg_a = parse_config(doc_a);
  run_command("run-all", cfg_a, false);

  auto doc_b = toy_doc(dir_b);
  doc_b["analysis"]["adherence"] = false;
  auto cfg_b = parse_config(doc_b);
  cfg_b.runtime.interrupt_after = 37;
  cfg_b.runtime.checkpoint_every = 5;
  int interruptions = 0;
  for (int i = 0; i < 200; ++i) {
    try {
      run_command("run-all", cfg_b, false);
      break;
    } catch (const Interrupted&) {
      ++interruptions;
    }
  }
  CHECK(interruptions > 3);
  for (const auto& f : all_output_files()) {
    if (f == outputs::kHistogram && !std::filesystem::exists(cfg_a.paths.run_dir / f)) continue;
    INFO(f);
    CHECK(read_file(cfg_a.paths.run_dir / f) == read_file(cfg_b.paths.run_dir / f));
  }
}
