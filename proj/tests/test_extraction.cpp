#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>

#include "conceptsynth/extraction.hpp"
#include "oracles.hpp"

using namespace csynth;
using nlohmann::json;

namespace {

BackendPtr judge_with(json mock) {
  BackendDescriptor d;
  d.backend_id = "j";
  d.role = Role::kJudge;
  d.judge_weight = 1.0;
  d.model_name = "judge";
  d.mock = std::move(mock);
  return make_backend(d);
}

BackendPtr judge_fixed(Task t, const std::string& out) { return judge_with({{"fixed", {{std::string(to_string(t)), out}}}}); }

KeyConcept kc(const std::string& id, const std::string& text) {
  KeyConcept c;
  c.id = id;
  c.text = text;
  c.provenance = {"s1"};
  return c;
}

}  // namespace

TEST_CASE("numbered concept lists") {
  const auto p = parse_concept_list("Here you go:\n1. Pythagorean theorem\n2) Law of sines\n3.   Area   of a triangle \n");
  REQUIRE(p.concepts.size() == 3);
  CHECK(p.concepts[0] == "Pythagorean theorem");
  CHECK(p.concepts[1] == "Law of sines");
  CHECK(p.concepts[2] == "Area of a triangle");
  CHECK(p.warnings.empty());

  const auto bullets = parse_concept_list("- Ratios\n* Proportions\n- Ratios\n");
  CHECK(bullets.concepts == std::vector<std::string>{"Ratios", "Proportions"});
}

TEST_CASE("over-long lists are truncated with a warning") {
  std::string out;
  for (int i = 1; i <= 7; ++i) out += std::to_string(i) + ". concept " + std::to_string(i) + "\n";
  const auto p = parse_concept_list(out);
  CHECK(p.concepts.size() == 5);
  CHECK(p.concepts.back() == "concept 5");
  CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("unparseable extractor output") {
  CHECK_THROWS_AS(parse_concept_list(""), ExtractionError);
  try {
    parse_concept_list("I cannot help with that.");
    FAIL("expected ExtractionError");
  } catch (const ExtractionError& e) {
    CHECK(e.raw_output() == "I cannot help with that.");
  }
}

TEST_CASE("extraction rejects empty questions") {
  auto ex = judge_fixed(Task::kExtractConcepts, "1. Ratios");
  SeedExample s{"s", "   ", "sol", {}};
  CHECK_THROWS_AS(extract_concepts(s, *ex, PromptLibrary::defaults()), ValidationError);
  s.question = "What is 2:4 simplified?";
  CHECK(extract_concepts(s, *ex, PromptLibrary::defaults()).concepts == std::vector<std::string>{"Ratios"});
}

TEST_CASE("quality review categories") {
  const auto prompts = PromptLibrary::defaults();
  const auto math = kc("kc-1", "Mathematics");
  const auto verbose = kc("kc-2", "The formula a^2 + b^2 = c^2 for right triangles with legs a, b");

  auto vague = judge_fixed(Task::kReviewConcept, "This is too broad. Verdict: vague");
  auto v = review_concept(math, *vague, prompts);
  CHECK(v.category == QualityCategory::kVague);
  CHECK_FALSE(v.kept);

  auto detailed = judge_fixed(Task::kReviewConcept, "overly_detailed");
  v = review_concept(verbose, *detailed, prompts);
  CHECK(v.category == QualityCategory::kOverlyDetailed);
  CHECK_FALSE(v.kept);

  auto garbage = judge_fixed(Task::kReviewConcept, "hmm");
  v = review_concept(math, *garbage, prompts);
  CHECK(v.kept);
  CHECK(v.review_flag);

  auto ok = judge_fixed(Task::kReviewConcept, "ok");
  CHECK(review_concept(math, *ok, prompts).kept);

  auto failing = judge_with({{"rules", {{{"contains", "Mathematics"}, {"fail", true}}}}});
  const auto all = filter_low_quality({math, verbose}, *failing, prompts, 2);
  REQUIRE(all.size() == 2);
  CHECK(all[0].kept);
  CHECK(all[0].review_flag);
}

TEST_CASE("the default mock judge catches the known bad phrases") {
  const auto prompts = PromptLibrary::defaults();
  auto j = judge_with(json::object());
  CHECK_FALSE(review_concept(kc("a", "Problem-solving strategies"), *j, prompts).kept);
  CHECK_FALSE(review_concept(kc("b", "a^2 + b^2 = c^2"), *j, prompts).kept);
  CHECK(review_concept(kc("c", "Law of sines"), *j, prompts).kept);
}

TEST_CASE("similarity band boundaries") {
  CHECK(classify_band(0.6999) == SimilarityBand::kDistinct);
  CHECK(classify_band(0.70) == SimilarityBand::kJudgeChecked);
  CHECK(classify_band(0.805) == SimilarityBand::kJudgeChecked);
  CHECK(classify_band(0.865) == SimilarityBand::kJudgeChecked);
  CHECK(classify_band(0.8999) == SimilarityBand::kJudgeChecked);
  CHECK(classify_band(0.90) == SimilarityBand::kSame);
  CHECK(classify_band(1.0) == SimilarityBand::kSame);
  CHECK(classify_band(-0.3) == SimilarityBand::kDistinct);
}

TEST_CASE("pairwise similarity covers every unordered pair once") {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g;
  std::vector<std::string> ids{"d", "a", "c", "b", "e"};
  std::vector<std::vector<float>> vecs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<float> v(8);
    for (auto& x : v) x = g(rng);
    normalize_in_place(v);
    vecs.push_back(v);
  }
  const auto verdicts = pairwise_similarity(ids, vecs);
  CHECK(verdicts.size() == 10);
  std::set<oracle::Pair> seen;
  for (const auto& v : verdicts) {
    CHECK(v.first < v.second);
    CHECK(v.band == classify_band(v.cosine));
    seen.insert({v.first, v.second});
  }
  CHECK(seen.size() == 10);
  CHECK_THROWS_AS(pairwise_similarity({"a"}, {vecs[0]}), ValidationError);
}

TEST_CASE("judge decides the middle band") {
  const auto prompts = PromptLibrary::defaults();
  SimilarityVerdict v;
  v.first = "a";
  v.second = "b";
  v.cosine = 0.805;
  v.band = SimilarityBand::kJudgeChecked;
  const std::map<std::string, std::string> texts{{"a", "Law of sines"}, {"b", "Sine rule"}};

  auto yes = judge_fixed(Task::kConfirmSynonym, "YES");
  auto out = confirm_synonyms({v}, texts, *yes, prompts);
  CHECK(out[0].judge_confirmed == true);
  CHECK(out[0].merges());

  auto no = judge_fixed(Task::kConfirmSynonym, "NO");
  out = confirm_synonyms({v}, texts, *no, prompts);
  CHECK(out[0].judge_confirmed == false);
  CHECK_FALSE(out[0].merges());

  auto garbage = judge_fixed(Task::kConfirmSynonym, "perhaps");
  CHECK_FALSE(confirm_synonyms({v}, texts, *garbage, prompts)[0].merges());

  v.band = SimilarityBand::kSame;
  CHECK_THROWS_AS(confirm_synonyms({v}, texts, *yes, prompts), ValidationError);
}

TEST_CASE("clusters match connected components and ignore input order") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 30; ++round) {
    const int n = 2 + static_cast<int>(rng() % 18);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("k" + std::to_string(100 + i));
    std::vector<SimilarityVerdict> verdicts;
    std::vector<oracle::Pair> links;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        SimilarityVerdict v;
        v.first = ids[static_cast<std::size_t>(i)];
        v.second = ids[static_cast<std::size_t>(j)];
        const auto r = rng() % 10;
        v.band = r == 0 ? SimilarityBand::kSame : r == 1 ? SimilarityBand::kJudgeChecked : SimilarityBand::kDistinct;
        if (v.band == SimilarityBand::kJudgeChecked) v.judge_confirmed = (rng() % 2) == 0;
        if (v.merges()) links.push_back({v.first, v.second});
        verdicts.push_back(v);
      }
    }
    const auto expected = oracle::components(ids, links);
    const auto base = build_clusters(ids, verdicts);
    std::set<std::set<std::string>> got;
    for (const auto& c : base) {
      got.insert(c.member_ids);
      CHECK(c.cluster_id == cluster_id_for(c.member_ids));
    }
    CHECK(got == expected);
    for (std::size_t i = 1; i < base.size(); ++i) CHECK(*base[i - 1].member_ids.begin() < *base[i].member_ids.begin());

    for (int perm = 0; perm < 5; ++perm) {
      auto ids2 = ids;
      auto v2 = verdicts;
      std::shuffle(ids2.begin(), ids2.end(), rng);
      std::shuffle(v2.begin(), v2.end(), rng);
      const auto again = build_clusters(ids2, v2);
      REQUIRE(again.size() == base.size());
      for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(again[i].cluster_id == base[i].cluster_id);
        CHECK(again[i].member_ids == base[i].member_ids);
      }
    }
  }
}

TEST_CASE("representatives") {
  const auto prompts = PromptLibrary::defaults();
  std::map<std::string, KeyConcept> concepts{{"a", kc("a", "Law of sines")},
                                             {"b", kc("b", "Sine rule")},
                                             {"c", kc("c", "The sine law for triangles")}};
  ConceptCluster cluster;
  cluster.member_ids = {"a", "b", "c"};
  cluster.cluster_id = cluster_id_for(cluster.member_ids);

  auto pick2 = judge_fixed(Task::kChooseRepresentative, "Best: 2");
  auto choice = choose_representative(cluster, concepts, *pick2, prompts);
  CHECK(choice.kind == RepresentativeChoice::Kind::kMember);
  CHECK(choice.member_id == "b");

  auto fresh = judge_fixed(Task::kChooseRepresentative, "NEW: Sine law");
  choice = choose_representative(cluster, concepts, *fresh, prompts);
  CHECK(choice.kind == RepresentativeChoice::Kind::kSynthetic);
  CHECK(choice.synthetic_text == "Sine law");

  auto kb = apply_representatives({cluster}, concepts, {choice});
  REQUIRE(kb.clusters.size() == 1);
  REQUIRE(kb.concepts.size() == 4);
  int reps = 0;
  for (const auto& c : kb.concepts) {
    if (c.status == ConceptStatus::kRepresentative) {
      ++reps;
      CHECK(c.is_synthetic());
      CHECK(c.id == kb.clusters[0].representative_id);
    } else {
      CHECK(c.status == ConceptStatus::kClustered);
    }
    CHECK(c.cluster_id == cluster.cluster_id);
  }
  CHECK(reps == 1);

  auto out_of_range = judge_fixed(Task::kChooseRepresentative, "7");
  choice = choose_representative(cluster, concepts, *out_of_range, prompts);
  CHECK(choice.kind == RepresentativeChoice::Kind::kFallback);
  CHECK(choice.member_id == "b");  // shortest text

  auto failing = judge_with({{"rules", {{{"task", "choose_representative"}, {"fail", true}}}}});
  CHECK(choose_representative(cluster, concepts, *failing, prompts).kind == RepresentativeChoice::Kind::kFallback);

  ConceptCluster single;
  single.member_ids = {"a"};
  CHECK(choose_representative(single, concepts, *failing, prompts).member_id == "a");
}

TEST_CASE("seed concepts map onto representatives") {
  const std::map<std::string, std::string> rep{{"a", "r1"}, {"b", "r1"}, {"c", "r2"}, {"d", "r3"},
                                               {"e", "r4"}, {"f", "r5"}, {"g", "r6"}};
  CHECK(map_to_representatives({"a", "x", "b", "c"}, rep) == std::vector<std::string>{"r1", "r2"});
  CHECK(map_to_representatives({"a", "c", "d", "e", "f", "g"}, rep).size() == 5);
}
