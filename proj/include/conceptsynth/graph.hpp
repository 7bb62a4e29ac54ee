#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conceptsynth/types.hpp"

namespace csynth {

struct SeedConceptSet {
  std::string seed_id;
  std::vector<std::string> concept_ids;
};

struct Edge {
  std::string a;  // a < b
  std::string b;
  int weight = 0;
  bool operator==(const Edge&) const = default;
};

void to_json(nlohmann::json& j, const Edge& e);
void from_json(const nlohmann::json& j, Edge& e);

// Undirected co-occurrence graph over concept ids. Edge weight counts the seeds whose concept set
// contains both endpoints. Immutable once built; node indices follow sorted id order.
class ConceptGraph {
 public:
  struct Neighbor {
    std::size_t node;
    int weight;
  };

  // Every concept named by a seed becomes a node. When `known_ids` is given, unknown ids raise a
  // ValidationError naming the seed.
  static ConceptGraph build(const std::vector<SeedConceptSet>& seed_sets,
                            const std::set<std::string>* known_ids = nullptr);

  // Graph with the given nodes and edges; used by tests and re-loading exported edge lists.
  static ConceptGraph from_edges(const std::vector<std::string>& nodes, const std::vector<Edge>& edges);

  std::size_t node_count() const { return ids_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  const std::vector<std::string>& nodes() const { return ids_; }
  const std::string& id(std::size_t node) const { return ids_[node]; }

  std::optional<std::size_t> find(const std::string& id) const;
  // Like find() but throws ValidationError for unknown ids.
  std::size_t index(const std::string& id) const;

  std::span<const Neighbor> neighbors(std::size_t node) const { return adjacency_[node]; }
  std::size_t degree(std::size_t node) const { return adjacency_[node].size(); }
  int max_edge_weight() const;

  // 0 when the nodes are not adjacent.
  int weight(std::size_t a, std::size_t b) const;
  int weight(const std::string& a, const std::string& b) const;

  // All edges with a < b, sorted.
  std::vector<Edge> edges() const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::vector<Neighbor>> adjacency_;  // sorted by neighbor index
  std::size_t edge_count_ = 0;
};

// Breadth-first distances from `source` up to `max_depth` hops, together with the widest
// (max-bottleneck) shortest path into every reached node.
struct ShortestPathTree {
  std::vector<int> distance;    // -1 when unreached
  std::vector<int> bottleneck;  // widest shortest-path bottleneck; 0 for the source and unreached nodes
  std::vector<std::int64_t> predecessor;  // on a widest shortest path; -1 for source/unreached

  std::vector<std::size_t> path_to(std::size_t target) const;
};

ShortestPathTree shortest_path_tree(const ConceptGraph& g, std::size_t source, int max_depth = -1);

// BFS hop count; nullopt when unreachable. D(a,a) = 0.
std::optional<int> hop_distance(const ConceptGraph& g, const std::string& a, const std::string& b);

// Max over minimum-hop paths of the smallest edge weight on the path. Throws for unreachable pairs.
int bottleneck_weight(const ConceptGraph& g, const std::string& a, const std::string& b);

struct HubSet {
  std::set<std::string> hub_ids;
  double selection_fraction = 0.0;
  std::size_t min_degree_achieved = 0;
};

// The top ceil(fraction * |nodes|) nodes by degree (at least one), ties by ascending id.
HubSet identify_hubs(const ConceptGraph& g, double fraction);

std::string combination_id(CombinationKind kind, const std::vector<std::string>& concept_ids);

std::vector<ConceptCombination> enumerate_one_hop(const ConceptGraph& g);
std::vector<ConceptCombination> enumerate_two_hop(const ConceptGraph& g);

// Unordered pairs at exactly `distance` hops, each with a witness path and bottleneck weight.
// When `anchors` is given, at least one endpoint must be an anchor. Pairs whose bottleneck is
// below `min_weight` are dropped.
std::vector<ConceptCombination> enumerate_pairs_at_distance(const ConceptGraph& g, int distance, CombinationKind kind,
                                                            const std::set<std::string>* anchors = nullptr,
                                                            int min_weight = 0);

std::vector<ConceptCombination> enumerate_three_hop(const ConceptGraph& g, const HubSet& hubs, int min_weight);

struct CommunityOptions {
  std::set<int> sizes{3, 4};
  std::optional<std::size_t> cap;  // per size; nullopt = unlimited
};

struct CommunityEnumeration {
  std::vector<ConceptCombination> communities;
  std::map<int, bool> truncated;  // size -> cap was hit
};

// Cliques of each requested size in lexicographic id order, weight = min internal edge weight.
CommunityEnumeration enumerate_communities(const ConceptGraph& g, const CommunityOptions& options = {});

// True iff the concept set is not contained in any seed's concept set. Empty sets are not novel.
bool is_novel(const std::vector<std::string>& concept_ids, const std::vector<SeedConceptSet>& seed_sets);

// Uniform sample without replacement, deterministic for a given seed, returned in input order.
std::vector<ConceptCombination> sample_combinations(const std::vector<ConceptCombination>& combos, std::size_t budget,
                                                    std::uint64_t seed);

}  // namespace csynth
