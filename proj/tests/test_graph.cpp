#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "conceptsynth/error.hpp"
#include "conceptsynth/graph.hpp"
#include "oracles.hpp"

using namespace csynth;

namespace {

// P1={A,B,C}, P2={B,C,D}, P3={D,E}
std::vector<SeedConceptSet> g0_seeds() { return {{"P1", {"A", "B", "C"}}, {"P2", {"B", "C", "D"}}, {"P3", {"D", "E"}}}; }

std::set<oracle::Pair> pair_set(const std::vector<ConceptCombination>& combos) {
  std::set<oracle::Pair> out;
  for (const auto& c : combos) out.insert(oracle::ordered(c.concept_ids.at(0), c.concept_ids.at(1)));
  return out;
}

}  // namespace

TEST_CASE("G0 edge weights match pair counting") {
  const auto g = ConceptGraph::build(g0_seeds());
  const std::vector<Edge> expected{{"A", "B", 1}, {"A", "C", 1}, {"B", "C", 2}, {"B", "D", 1}, {"C", "D", 1}, {"D", "E", 1}};
  CHECK(g.edges() == expected);
  CHECK(g.node_count() == 5);
  CHECK(g.weight("C", "B") == 2);
  CHECK(g.weight("A", "E") == 0);
}

TEST_CASE("degenerate corpora") {
  const auto empty = ConceptGraph::build({});
  CHECK(empty.node_count() == 0);
  CHECK(empty.edge_count() == 0);
  CHECK(enumerate_one_hop(empty).empty());
  CHECK_THROWS_AS(identify_hubs(empty, 0.5), ValidationError);

  const auto single = ConceptGraph::build({{"s", {"X"}}});
  CHECK(single.node_count() == 1);
  CHECK(single.edge_count() == 0);
}

TEST_CASE("unknown concept ids name the seed") {
  const std::set<std::string> known{"A", "B"};
  try {
    ConceptGraph::build({{"seed-7", {"A", "Z"}}}, &known);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("seed-7") != std::string::npos);
  }
}

TEST_CASE("G0 hop distances") {
  const auto g = ConceptGraph::build(g0_seeds());
  CHECK(hop_distance(g, "A", "B") == 1);
  CHECK(hop_distance(g, "A", "D") == 2);
  CHECK(hop_distance(g, "A", "E") == 3);
  CHECK(hop_distance(g, "C", "C") == 0);
  CHECK_THROWS_AS(hop_distance(g, "A", "Q"), ValidationError);

  const auto split = ConceptGraph::build({{"s1", {"A", "B"}}, {"s2", {"C", "D"}}});
  CHECK_FALSE(hop_distance(split, "A", "C").has_value());
  CHECK_THROWS(bottleneck_weight(split, "A", "C"));
}

TEST_CASE("G0 one-hop and two-hop") {
  const auto g = ConceptGraph::build(g0_seeds());
  const auto one = enumerate_one_hop(g);
  CHECK(pair_set(one) == std::set<oracle::Pair>{{"A", "B"}, {"A", "C"}, {"B", "C"}, {"B", "D"}, {"C", "D"}, {"D", "E"}});
  for (const auto& c : one) {
    if (c.concept_ids == std::vector<std::string>{"B", "C"}) CHECK(c.weight == 2);
    CHECK(c.kind == CombinationKind::kOneHop);
  }

  const auto two = enumerate_two_hop(g);
  CHECK(pair_set(two) == std::set<oracle::Pair>{{"A", "D"}, {"B", "E"}, {"C", "E"}});
  for (const auto& c : two) {
    REQUIRE(c.witness.size() == 3);
    if (c.concept_ids == std::vector<std::string>{"A", "D"}) {
      CHECK(c.weight == 1);
      const bool via_b = c.witness == std::vector<std::string>{"A", "B", "D"};
      const bool via_c = c.witness == std::vector<std::string>{"A", "C", "D"};
      CHECK((via_b || via_c));
    }
  }
  CHECK(bottleneck_weight(g, "B", "E") == 1);
  CHECK(bottleneck_weight(g, "B", "C") == 2);

  const auto triangle = ConceptGraph::build({{"t", {"X", "Y", "Z"}}});
  CHECK(enumerate_two_hop(triangle).empty());
}

TEST_CASE("widest shortest path picks the heavier of two parallel routes") {
  // S-L-T with weights 1, S-H-T with weights 3.
  const auto g = ConceptGraph::from_edges({"H", "L", "S", "T"}, {{"L", "S", 1}, {"L", "T", 1}, {"H", "S", 3}, {"H", "T", 3}});
  CHECK(bottleneck_weight(g, "S", "T") == 3);
  const auto two = enumerate_two_hop(g);
  for (const auto& c : two) {
    if (c.concept_ids == std::vector<std::string>{"S", "T"}) CHECK(c.witness == std::vector<std::string>{"S", "H", "T"});
  }
}

TEST_CASE("G0 hubs") {
  const auto g = ConceptGraph::build(g0_seeds());
  CHECK(identify_hubs(g, 0.6).hub_ids == std::set<std::string>{"B", "C", "D"});
  CHECK(identify_hubs(g, 0.2).hub_ids == std::set<std::string>{"B"});
  CHECK(identify_hubs(g, 0.01).hub_ids == std::set<std::string>{"B"});
  CHECK(identify_hubs(g, 1.0).hub_ids.size() == 5);
  CHECK(identify_hubs(g, 0.6).min_degree_achieved == 3);
  CHECK_THROWS(identify_hubs(g, 0.0));
  CHECK_THROWS(identify_hubs(g, 1.5));
}

TEST_CASE("G0 three-hop") {
  const auto g = ConceptGraph::build(g0_seeds());
  CHECK(enumerate_three_hop(g, identify_hubs(g, 0.6), 0).empty());

  HubSet forced;
  forced.hub_ids = {"A"};
  const auto three = enumerate_three_hop(g, forced, 1);
  REQUIRE(three.size() == 1);
  CHECK(three[0].concept_ids == std::vector<std::string>{"A", "E"});
  CHECK(three[0].hops() == 3);
  CHECK(three[0].kind == CombinationKind::kThreeHop);

  CHECK(enumerate_three_hop(g, forced, 5).empty());
}

TEST_CASE("G0 communities") {
  const auto g = ConceptGraph::build(g0_seeds());
  const auto res = enumerate_communities(g);
  std::set<std::vector<std::string>> got;
  for (const auto& c : res.communities) got.insert(c.concept_ids);
  CHECK(got == std::set<std::vector<std::string>>{{"A", "B", "C"}, {"B", "C", "D"}});
  for (const auto& c : res.communities) {
    if (c.concept_ids == std::vector<std::string>{"A", "B", "C"}) CHECK(c.weight == 1);
  }

  const auto k4 = ConceptGraph::build({{"k", {"A", "B", "C", "D"}}});
  const auto all = enumerate_communities(k4);
  std::size_t threes = 0, fours = 0;
  for (const auto& c : all.communities) (c.concept_ids.size() == 3 ? threes : fours)++;
  CHECK(threes == 4);
  CHECK(fours == 1);

  CommunityOptions capped;
  capped.cap = 2;
  const auto limited = enumerate_communities(k4, capped);
  CHECK(limited.truncated.at(3));
  CHECK_FALSE(limited.truncated.at(4));
  REQUIRE(limited.communities.size() == 3);
  CHECK(limited.communities[0].concept_ids == std::vector<std::string>{"A", "B", "C"});
  CHECK(limited.communities[1].concept_ids == std::vector<std::string>{"A", "B", "D"});
}

TEST_CASE("novelty against G0 seed sets") {
  const std::vector<SeedConceptSet> seeds{{"1", {"A", "B", "C"}}, {"2", {"B", "C", "D"}}, {"3", {"D", "E"}}};
  CHECK(is_novel({"A", "D"}, seeds));
  CHECK_FALSE(is_novel({"B", "C"}, seeds));
  CHECK_FALSE(is_novel({}, seeds));
}

TEST_CASE("sampling") {
  const auto g = ConceptGraph::build(g0_seeds());
  const auto one = enumerate_one_hop(g);
  CHECK(sample_combinations(one, 0, 1).empty());
  CHECK(sample_combinations(one, 100, 1) == one);
  CHECK(sample_combinations(one, 3, 42) == sample_combinations(one, 3, 42));
  const auto picked = sample_combinations(one, 3, 42);
  CHECK(picked.size() == 3);
  // Input order is kept.
  std::size_t last = 0;
  for (const auto& c : picked) {
    const auto pos = static_cast<std::size_t>(std::find(one.begin(), one.end(), c) - one.begin());
    CHECK(pos >= last);
    last = pos;
  }
}

TEST_CASE("sampling is uniform enough") {
  std::vector<ConceptCombination> combos(10);
  for (std::size_t i = 0; i < combos.size(); ++i) combos[i].id = "c" + std::to_string(i);
  std::map<std::string, int> hits;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    for (const auto& c : sample_combinations(combos, 3, seed)) ++hits[c.id];
  }
  // Expected 1200 each; 5 sigma is about 145.
  for (const auto& [id, n] : hits) CHECK(std::abs(n - 1200) < 150);
}

TEST_CASE("property: random corpora agree with brute-force oracles") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 60; ++round) {
    const int n_seeds = std::uniform_int_distribution<int>(0, 100)(rng);
    const int n_concepts = std::uniform_int_distribution<int>(2, 12)(rng);
    const auto seeds = oracle::random_corpus(rng, n_seeds, n_concepts, 3);
    const auto g = ConceptGraph::build(seeds);
    const oracle::Dense dense(oracle::node_list(seeds), oracle::cooccurrence(seeds));
    const auto hops = oracle::hop_matrix(dense);

    CHECK(pair_set(enumerate_one_hop(g)) == oracle::pairs_at(dense, hops, 1));
    const auto two = enumerate_two_hop(g);
    CHECK(pair_set(two) == oracle::pairs_at(dense, hops, 2));
    const auto three_all = enumerate_pairs_at_distance(g, 3, CombinationKind::kThreeHop);
    CHECK(pair_set(three_all) == oracle::pairs_at(dense, hops, 3));

    for (const auto* set : {&two, &three_all}) {
      for (const auto& c : *set) {
        const auto a = static_cast<std::size_t>(std::find(dense.nodes.begin(), dense.nodes.end(), c.concept_ids[0]) - dense.nodes.begin());
        const auto b = static_cast<std::size_t>(std::find(dense.nodes.begin(), dense.nodes.end(), c.concept_ids[1]) - dense.nodes.begin());
        CHECK(c.weight == oracle::bottleneck(dense, a, b));
        // The witness is a real path whose narrowest edge is the reported weight.
        int narrowest = std::numeric_limits<int>::max();
        for (std::size_t i = 0; i + 1 < c.witness.size(); ++i) narrowest = std::min(narrowest, g.weight(c.witness[i], c.witness[i + 1]));
        CHECK(narrowest == static_cast<int>(c.weight));
      }
    }
  }
}

TEST_CASE("property: distance partition on graphs up to 50 nodes") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 20; ++round) {
    const auto seeds = oracle::random_corpus(rng, 60, 50, 3);
    const auto g = ConceptGraph::build(seeds);
    const oracle::Dense dense(oracle::node_list(seeds), oracle::cooccurrence(seeds));
    const auto hops = oracle::hop_matrix(dense);
    const auto d1 = pair_set(enumerate_one_hop(g));
    const auto d2 = pair_set(enumerate_two_hop(g));
    const auto d3 = pair_set(enumerate_pairs_at_distance(g, 3, CombinationKind::kThreeHop));
    std::set<oracle::Pair> all;
    std::size_t total = d1.size() + d2.size() + d3.size();
    all.insert(d1.begin(), d1.end());
    all.insert(d2.begin(), d2.end());
    all.insert(d3.begin(), d3.end());
    CHECK(all.size() == total);
    std::set<oracle::Pair> expected;
    for (int d = 1; d <= 3; ++d) {
      const auto p = oracle::pairs_at(dense, hops, d);
      expected.insert(p.begin(), p.end());
    }
    CHECK(all == expected);
  }
}

TEST_CASE("property: communities equal exhaustive clique search") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 40; ++round) {
    const auto seeds = oracle::random_corpus(rng, std::uniform_int_distribution<int>(1, 30)(rng), 15, 4);
    const auto g = ConceptGraph::build(seeds);
    const oracle::Dense dense(oracle::node_list(seeds), oracle::cooccurrence(seeds));
    const auto res = enumerate_communities(g);
    std::set<std::vector<std::string>> got;
    for (const auto& c : res.communities) {
      got.insert(c.concept_ids);
      int min_w = std::numeric_limits<int>::max();
      for (std::size_t i = 0; i < c.concept_ids.size(); ++i) {
        for (std::size_t j = i + 1; j < c.concept_ids.size(); ++j) {
          const int w = g.weight(c.concept_ids[i], c.concept_ids[j]);
          CHECK(w > 0);
          min_w = std::min(min_w, w);
        }
      }
      CHECK(c.weight == min_w);
    }
    auto expected = oracle::cliques(dense, 3);
    const auto fours = oracle::cliques(dense, 4);
    expected.insert(fours.begin(), fours.end());
    CHECK(got == expected);
    CHECK(got.size() == res.communities.size());
  }
}

TEST_CASE("property: three-hop pairs are hub-anchored and above the weight floor") {
  std::mt19937_64 rng(17);
  for (int round = 0; round < 40; ++round) {
    const auto seeds = oracle::random_corpus(rng, 40, 20, 2);
    const auto g = ConceptGraph::build(seeds);
    if (g.node_count() == 0) continue;
    const oracle::Dense dense(oracle::node_list(seeds), oracle::cooccurrence(seeds));
    const auto hops = oracle::hop_matrix(dense);
    const auto hubs = identify_hubs(g, 0.2);
    for (int min_weight : {0, 1, 2}) {
      std::set<oracle::Pair> expected;
      for (const auto& p : oracle::pairs_at(dense, hops, 3)) {
        if (!hubs.hub_ids.contains(p.first) && !hubs.hub_ids.contains(p.second)) continue;
        const auto a = static_cast<std::size_t>(std::find(dense.nodes.begin(), dense.nodes.end(), p.first) - dense.nodes.begin());
        const auto b = static_cast<std::size_t>(std::find(dense.nodes.begin(), dense.nodes.end(), p.second) - dense.nodes.begin());
        if (oracle::bottleneck(dense, a, b) >= min_weight) expected.insert(p);
      }
      CHECK(pair_set(enumerate_three_hop(g, hubs, min_weight)) == expected);
    }
  }
}

TEST_CASE("property: hubs do not depend on seed order") {
  std::mt19937_64 rng(19);
  for (int round = 0; round < 30; ++round) {
    auto seeds = oracle::random_corpus(rng, 30, 15, 4);
    const auto g1 = ConceptGraph::build(seeds);
    if (g1.node_count() == 0) continue;
    std::shuffle(seeds.begin(), seeds.end(), rng);
    for (auto& s : seeds) std::shuffle(s.concept_ids.begin(), s.concept_ids.end(), rng);
    const auto g2 = ConceptGraph::build(seeds);
    for (double f : {0.01, 0.1, 0.3, 1.0}) CHECK(identify_hubs(g1, f).hub_ids == identify_hubs(g2, f).hub_ids);
    CHECK(g1.edges() == g2.edges());
  }
}

TEST_CASE("property: one-hop pairs are never novel, multi-hop pairs always are") {
  std::mt19937_64 rng(23);
  for (int round = 0; round < 50; ++round) {
    const auto seeds = oracle::random_corpus(rng, 40, 20, 4);
    const auto g = ConceptGraph::build(seeds);
    for (const auto& c : enumerate_one_hop(g)) CHECK_FALSE(is_novel(c.concept_ids, seeds));
    for (const auto& c : enumerate_two_hop(g)) CHECK(is_novel(c.concept_ids, seeds));
    for (const auto& c : enumerate_pairs_at_distance(g, 3, CombinationKind::kThreeHop)) CHECK(is_novel(c.concept_ids, seeds));
    for (const auto& c : enumerate_communities(g).communities) {
      CHECK(is_novel(c.concept_ids, seeds) == !oracle::subset_of_some_seed(c.concept_ids, seeds));
    }
  }
}
