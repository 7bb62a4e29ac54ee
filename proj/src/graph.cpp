#include "conceptsynth/graph.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <deque>
#include <random>

#include "conceptsynth/error.hpp"
#include "conceptsynth/hashing.hpp"

namespace csynth {
namespace {

using nlohmann::json;

constexpr int kUnbounded = INT_MAX;

ConceptCombination make_pair_combination(const ConceptGraph& g, CombinationKind kind, std::size_t a,
                                         const ShortestPathTree& tree, std::size_t b) {
  ConceptCombination c;
  c.kind = kind;
  c.concept_ids = {g.id(a), g.id(b)};
  c.weight = tree.bottleneck[b];
  for (auto node : tree.path_to(b)) c.witness.push_back(g.id(node));
  c.id = combination_id(kind, c.concept_ids);
  return c;
}

}  // namespace

void to_json(json& j, const Edge& e) { j = json{{"a", e.a}, {"b", e.b}, {"weight", e.weight}}; }

void from_json(const json& j, Edge& e) {
  e.a = j.at("a").get<std::string>();
  e.b = j.at("b").get<std::string>();
  e.weight = j.at("weight").get<int>();
}

ConceptGraph ConceptGraph::build(const std::vector<SeedConceptSet>& seed_sets, const std::set<std::string>* known_ids) {
  std::set<std::string> node_set;
  for (const auto& s : seed_sets) {
    for (const auto& c : s.concept_ids) {
      if (known_ids && !known_ids->contains(c)) {
        throw ValidationError("seed " + s.seed_id + " references unknown concept id " + c);
      }
      node_set.insert(c);
    }
  }

  ConceptGraph g;
  g.ids_.assign(node_set.begin(), node_set.end());
  g.adjacency_.resize(g.ids_.size());

  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  for (const auto& s : seed_sets) {
    std::vector<std::size_t> members;
    for (const auto& c : s.concept_ids) members.push_back(g.index(c));
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    for (std::size_t x = 0; x < members.size(); ++x) {
      for (std::size_t y = x + 1; y < members.size(); ++y) ++counts[{members[x], members[y]}];
    }
  }
  for (const auto& [pair, w] : counts) {
    g.adjacency_[pair.first].push_back({pair.second, w});
    g.adjacency_[pair.second].push_back({pair.first, w});
  }
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const auto& x, const auto& y) { return x.node < y.node; });
  }
  g.edge_count_ = counts.size();
  return g;
}

ConceptGraph ConceptGraph::from_edges(const std::vector<std::string>& nodes, const std::vector<Edge>& edges) {
  std::set<std::string> node_set(nodes.begin(), nodes.end());
  for (const auto& e : edges) {
    node_set.insert(e.a);
    node_set.insert(e.b);
  }
  ConceptGraph g;
  g.ids_.assign(node_set.begin(), node_set.end());
  g.adjacency_.resize(g.ids_.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    if (e.a == e.b) throw ValidationError("self-edge on " + e.a);
    if (e.weight <= 0) throw ValidationError("edge " + e.a + "-" + e.b + " has non-positive weight");
    auto a = g.index(e.a), b = g.index(e.b);
    if (a > b) std::swap(a, b);
    if (!seen.insert({a, b}).second) throw ValidationError("duplicate edge " + e.a + "-" + e.b);
    g.adjacency_[a].push_back({b, e.weight});
    g.adjacency_[b].push_back({a, e.weight});
  }
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const auto& x, const auto& y) { return x.node < y.node; });
  }
  g.edge_count_ = seen.size();
  return g;
}

std::optional<std::size_t> ConceptGraph::find(const std::string& id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

std::size_t ConceptGraph::index(const std::string& id) const {
  if (auto i = find(id)) return *i;
  throw ValidationError("unknown concept node " + id);
}

int ConceptGraph::max_edge_weight() const {
  int best = 0;
  for (const auto& adj : adjacency_) {
    for (const auto& n : adj) best = std::max(best, n.weight);
  }
  return best;
}

int ConceptGraph::weight(std::size_t a, std::size_t b) const {
  const auto& adj = adjacency_[a];
  auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const Neighbor& n, std::size_t v) { return n.node < v; });
  return (it != adj.end() && it->node == b) ? it->weight : 0;
}

int ConceptGraph::weight(const std::string& a, const std::string& b) const { return weight(index(a), index(b)); }

std::vector<Edge> ConceptGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(edge_count_);
  for (std::size_t a = 0; a < adjacency_.size(); ++a) {
    for (const auto& n : adjacency_[a]) {
      if (n.node > a) out.push_back({ids_[a], ids_[n.node], n.weight});
    }
  }
  return out;
}

std::vector<std::size_t> ShortestPathTree::path_to(std::size_t target) const {
  if (distance[target] < 0) return {};
  std::vector<std::size_t> path;
  for (std::int64_t v = static_cast<std::int64_t>(target); v >= 0; v = predecessor[static_cast<std::size_t>(v)]) {
    path.push_back(static_cast<std::size_t>(v));
  }
  std::reverse(path.begin(), path.end());
  return path;
}

ShortestPathTree shortest_path_tree(const ConceptGraph& g, std::size_t source, int max_depth) {
  const std::size_t n = g.node_count();
  ShortestPathTree t;
  t.distance.assign(n, -1);
  t.bottleneck.assign(n, 0);
  t.predecessor.assign(n, -1);
  t.distance[source] = 0;
  t.bottleneck[source] = kUnbounded;

  // Layered BFS: every predecessor of a node at depth d+1 is dequeued before that node, so its
  // bottleneck is final when the node itself is expanded.
  std::deque<std::size_t> queue{source};
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    if (max_depth >= 0 && t.distance[u] >= max_depth) continue;
    for (const auto& nb : g.neighbors(u)) {
      const std::size_t v = nb.node;
      if (t.distance[v] < 0) {
        t.distance[v] = t.distance[u] + 1;
        queue.push_back(v);
      }
      if (t.distance[v] != t.distance[u] + 1) continue;
      const int candidate = std::min(t.bottleneck[u], nb.weight);
      const auto pred = static_cast<std::int64_t>(u);
      if (candidate > t.bottleneck[v] || (candidate == t.bottleneck[v] && pred < t.predecessor[v])) {
        t.bottleneck[v] = candidate;
        t.predecessor[v] = pred;
      }
    }
  }
  t.bottleneck[source] = 0;
  return t;
}

std::optional<int> hop_distance(const ConceptGraph& g, const std::string& a, const std::string& b) {
  const auto ia = g.index(a), ib = g.index(b);
  const auto tree = shortest_path_tree(g, ia);
  if (tree.distance[ib] < 0) return std::nullopt;
  return tree.distance[ib];
}

int bottleneck_weight(const ConceptGraph& g, const std::string& a, const std::string& b) {
  const auto ia = g.index(a), ib = g.index(b);
  if (ia == ib) throw ValidationError("bottleneck_weight: endpoints coincide (" + a + ")");
  const auto tree = shortest_path_tree(g, ia);
  if (tree.distance[ib] < 0) throw ValidationError("bottleneck_weight: " + a + " and " + b + " are not connected");
  return tree.bottleneck[ib];
}

HubSet identify_hubs(const ConceptGraph& g, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) throw ValidationError("hub fraction must lie in (0, 1]");
  if (g.node_count() == 0) throw ValidationError("identify_hubs: graph is empty");
  const double raw = fraction * static_cast<double>(g.node_count());
  // The epsilon keeps exact products like 0.6 * 5 from rounding up to 4.
  std::size_t k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  k = std::clamp<std::size_t>(k, 1, g.node_count());

  std::vector<std::size_t> order(g.node_count());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
    return g.id(a) < g.id(b);
  });

  HubSet hubs;
  hubs.selection_fraction = fraction;
  hubs.min_degree_achieved = g.degree(order[k - 1]);
  for (std::size_t i = 0; i < k; ++i) hubs.hub_ids.insert(g.id(order[i]));
  return hubs;
}

std::string combination_id(CombinationKind kind, const std::vector<std::string>& concept_ids) {
  std::string payload(to_string(kind));
  for (const auto& id : concept_ids) {
    payload += '\n';
    payload += id;
  }
  return content_id("cmb-", payload);
}

std::vector<ConceptCombination> enumerate_one_hop(const ConceptGraph& g) {
  std::vector<ConceptCombination> out;
  for (const auto& e : g.edges()) {
    ConceptCombination c;
    c.kind = CombinationKind::kOneHop;
    c.concept_ids = {e.a, e.b};
    c.weight = e.weight;
    c.witness = {e.a, e.b};
    c.id = combination_id(c.kind, c.concept_ids);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ConceptCombination> enumerate_pairs_at_distance(const ConceptGraph& g, int distance, CombinationKind kind,
                                                            const std::set<std::string>* anchors, int min_weight) {
  if (distance < 1) throw ValidationError("pair distance must be >= 1");
  std::vector<ConceptCombination> out;
  for (std::size_t a = 0; a < g.node_count(); ++a) {
    const bool a_anchor = anchors == nullptr || anchors->contains(g.id(a));
    const auto tree = shortest_path_tree(g, a, distance);
    for (std::size_t b = a + 1; b < g.node_count(); ++b) {
      if (tree.distance[b] != distance) continue;
      if (!a_anchor && !anchors->contains(g.id(b))) continue;
      if (tree.bottleneck[b] < min_weight) continue;
      out.push_back(make_pair_combination(g, kind, a, tree, b));
    }
  }
  return out;
}

std::vector<ConceptCombination> enumerate_two_hop(const ConceptGraph& g) {
  return enumerate_pairs_at_distance(g, 2, CombinationKind::kTwoHop);
}

std::vector<ConceptCombination> enumerate_three_hop(const ConceptGraph& g, const HubSet& hubs, int min_weight) {
  return enumerate_pairs_at_distance(g, 3, CombinationKind::kThreeHop, &hubs.hub_ids, min_weight);
}

CommunityEnumeration enumerate_communities(const ConceptGraph& g, const CommunityOptions& options) {
  for (int s : options.sizes) {
    if (s != 3 && s != 4) throw ValidationError("community sizes must be 3 or 4");
  }
  const bool want3 = options.sizes.contains(3), want4 = options.sizes.contains(4);
  const std::size_t cap = options.cap.value_or(SIZE_MAX);

  CommunityEnumeration result;
  std::vector<ConceptCombination> threes, fours;
  auto emit = [&](std::vector<ConceptCombination>& bucket, int size, std::initializer_list<std::size_t> members) {
    if (bucket.size() >= cap) {
      result.truncated[size] = true;
      return;
    }
    ConceptCombination c;
    c.kind = CombinationKind::kCommunity;
    const std::vector<std::size_t> m(members);
    int w = INT_MAX;
    for (std::size_t x = 0; x < m.size(); ++x) {
      c.concept_ids.push_back(g.id(m[x]));
      for (std::size_t y = x + 1; y < m.size(); ++y) w = std::min(w, g.weight(m[x], m[y]));
    }
    c.weight = w;
    c.id = combination_id(c.kind, c.concept_ids);
    bucket.push_back(std::move(c));
  };

  for (std::size_t i = 0; i < g.node_count(); ++i) {
    for (const auto& nj : g.neighbors(i)) {
      const std::size_t j = nj.node;
      if (j <= i) continue;
      for (const auto& nk : g.neighbors(j)) {
        const std::size_t k = nk.node;
        if (k <= j || g.weight(i, k) == 0) continue;
        if (want3) emit(threes, 3, {i, j, k});
        if (!want4) continue;
        for (const auto& nl : g.neighbors(k)) {
          const std::size_t l = nl.node;
          if (l <= k || g.weight(i, l) == 0 || g.weight(j, l) == 0) continue;
          emit(fours, 4, {i, j, k, l});
        }
      }
    }
  }
  if (want3) result.truncated.try_emplace(3, false);
  if (want4) result.truncated.try_emplace(4, false);
  result.communities = std::move(threes);
  std::move(fours.begin(), fours.end(), std::back_inserter(result.communities));
  return result;
}

bool is_novel(const std::vector<std::string>& concept_ids, const std::vector<SeedConceptSet>& seed_sets) {
  if (concept_ids.empty()) return false;
  for (const auto& s : seed_sets) {
    const bool covered = std::all_of(concept_ids.begin(), concept_ids.end(), [&](const std::string& c) {
      return std::find(s.concept_ids.begin(), s.concept_ids.end(), c) != s.concept_ids.end();
    });
    if (covered) return false;
  }
  return true;
}

std::vector<ConceptCombination> sample_combinations(const std::vector<ConceptCombination>& combos, std::size_t budget,
                                                    std::uint64_t seed) {
  if (budget >= combos.size()) return combos;
  // Partial Fisher-Yates on indices. mt19937_64 output is fully specified by the standard, and the
  // bounded draw is done by hand so samples match across standard library implementations.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(combos.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < budget; ++i) {
    const std::uint64_t span = idx.size() - i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(idx[i], idx[i + static_cast<std::size_t>(r % span)]);
  }
  idx.resize(budget);
  std::sort(idx.begin(), idx.end());
  std::vector<ConceptCombination> out;
  out.reserve(budget);
  for (auto i : idx) out.push_back(combos[i]);
  return out;
}

}  // namespace csynth
