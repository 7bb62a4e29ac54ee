#pragma once
// Brute-force reference implementations. They favour obviousness over speed and share no code
// with the library, so agreement between the two is meaningful.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "conceptsynth/graph.hpp"

namespace oracle {

using Pair = std::pair<std::string, std::string>;

inline Pair ordered(const std::string& a, const std::string& b) { return a < b ? Pair{a, b} : Pair{b, a}; }

// Random corpus: `n_seeds` seeds each naming 1..max_per_seed distinct concepts out of `n_concepts`.
inline std::vector<csynth::SeedConceptSet> random_corpus(std::mt19937_64& rng, int n_seeds, int n_concepts,
                                                         int max_per_seed = 5) {
  std::vector<csynth::SeedConceptSet> out;
  std::uniform_int_distribution<int> size_dist(1, std::min(max_per_seed, n_concepts));
  std::uniform_int_distribution<int> concept_dist(0, n_concepts - 1);
  for (int s = 0; s < n_seeds; ++s) {
    const int k = size_dist(rng);
    std::set<int> chosen;
    while (static_cast<int>(chosen.size()) < k) chosen.insert(concept_dist(rng));
    csynth::SeedConceptSet set{"s" + std::to_string(s), {}};
    for (int c : chosen) set.concept_ids.push_back("c" + std::string(c < 10 ? "0" : "") + std::to_string(c));
    std::shuffle(set.concept_ids.begin(), set.concept_ids.end(), rng);
    out.push_back(std::move(set));
  }
  return out;
}

// Edge weight = number of seeds containing both concepts, by checking every pair of every seed.
inline std::map<Pair, int> cooccurrence(const std::vector<csynth::SeedConceptSet>& seeds) {
  std::map<Pair, int> w;
  for (const auto& s : seeds) {
    for (std::size_t i = 0; i < s.concept_ids.size(); ++i) {
      for (std::size_t j = 0; j < s.concept_ids.size(); ++j) {
        if (i < j && s.concept_ids[i] != s.concept_ids[j]) ++w[ordered(s.concept_ids[i], s.concept_ids[j])];
      }
    }
  }
  return w;
}

inline std::vector<std::string> node_list(const std::vector<csynth::SeedConceptSet>& seeds) {
  std::set<std::string> ids;
  for (const auto& s : seeds) ids.insert(s.concept_ids.begin(), s.concept_ids.end());
  return {ids.begin(), ids.end()};
}

// Dense weight matrix over `nodes` (0 = no edge).
struct Dense {
  std::vector<std::string> nodes;
  std::vector<std::vector<int>> w;

  Dense(std::vector<std::string> ns, const std::map<Pair, int>& weights) : nodes(std::move(ns)) {
    w.assign(nodes.size(), std::vector<int>(nodes.size(), 0));
    std::map<std::string, std::size_t> at;
    for (std::size_t i = 0; i < nodes.size(); ++i) at[nodes[i]] = i;
    for (const auto& [p, x] : weights) {
      w[at[p.first]][at[p.second]] = x;
      w[at[p.second]][at[p.first]] = x;
    }
  }
  std::size_t size() const { return nodes.size(); }
};

inline constexpr int kInf = std::numeric_limits<int>::max() / 4;

// All-pairs hop counts by Floyd-Warshall.
inline std::vector<std::vector<int>> hop_matrix(const Dense& g) {
  const std::size_t n = g.size();
  std::vector<std::vector<int>> d(n, std::vector<int>(n, kInf));
  for (std::size_t i = 0; i < n; ++i) {
    d[i][i] = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (g.w[i][j] > 0) d[i][j] = 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (d[i][k] + d[k][j] < d[i][j]) d[i][j] = d[i][k] + d[k][j];
      }
    }
  }
  return d;
}

// Pairs (by id) at exactly hop distance `d`.
inline std::set<Pair> pairs_at(const Dense& g, const std::vector<std::vector<int>>& hops, int d) {
  std::set<Pair> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      if (hops[i][j] == d) out.insert(ordered(g.nodes[i], g.nodes[j]));
    }
  }
  return out;
}

// Widest shortest path by enumerating every simple path of exactly the shortest length.
inline int bottleneck(const Dense& g, std::size_t a, std::size_t b) {
  const auto hops = hop_matrix(g);
  const int len = hops[a][b];
  if (len == kInf || len == 0) return -1;
  int best = 0;
  std::vector<std::size_t> path{a};
  std::vector<bool> used(g.size(), false);
  used[a] = true;
  auto dfs = [&](auto&& self, std::size_t at, int depth, int narrowest) -> void {
    if (depth == len) {
      if (at == b) best = std::max(best, narrowest);
      return;
    }
    for (std::size_t nx = 0; nx < g.size(); ++nx) {
      if (g.w[at][nx] == 0 || used[nx]) continue;
      used[nx] = true;
      self(self, nx, depth + 1, std::min(narrowest, g.w[at][nx]));
      used[nx] = false;
    }
  };
  dfs(dfs, a, 0, std::numeric_limits<int>::max());
  return best;
}

// All k-subsets whose pairs are all adjacent, checked subset by subset through a bitmask sweep.
inline std::set<std::vector<std::string>> cliques(const Dense& g, int k) {
  std::set<std::vector<std::string>> out;
  const std::size_t n = g.size();
  if (n > 24) return out;
  for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1U << i)) members.push_back(i);
    }
    bool complete = true;
    for (std::size_t x = 0; x < members.size() && complete; ++x) {
      for (std::size_t y = x + 1; y < members.size() && complete; ++y) complete = g.w[members[x]][members[y]] > 0;
    }
    if (!complete) continue;
    std::vector<std::string> ids;
    for (auto m : members) ids.push_back(g.nodes[m]);
    out.insert(ids);
  }
  return out;
}

// Connected components by repeated label relaxation until nothing changes.
inline std::set<std::set<std::string>> components(const std::vector<std::string>& ids, const std::vector<Pair>& links) {
  std::map<std::string, std::string> label;
  for (const auto& id : ids) label[id] = id;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& [a, b] : links) {
      const auto lo = std::min(label[a], label[b]);
      if (label[a] != lo) label[a] = lo, changed = true;
      if (label[b] != lo) label[b] = lo, changed = true;
    }
  }
  std::map<std::string, std::set<std::string>> groups;
  for (const auto& [id, l] : label) groups[l].insert(id);
  std::set<std::set<std::string>> out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

// Lowercase, drop ASCII punctuation, split on whitespace.
inline std::vector<std::string> tokens(const std::string& text) {
  std::string cleaned;
  for (unsigned char c : text) {
    if (c >= 0x80) {
      cleaned.push_back(static_cast<char>(c));
    } else if (std::isalnum(c)) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      cleaned.push_back(' ');
    }
  }
  std::vector<std::string> out;
  std::string cur;
  for (char c : cleaned + " ") {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

inline std::set<std::vector<std::string>> ngram_set(const std::vector<std::string>& texts, int n) {
  std::set<std::vector<std::string>> out;
  for (const auto& t : texts) {
    const auto toks = tokens(t);
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      out.insert(std::vector<std::string>(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i) + n));
    }
  }
  return out;
}

// nullopt when the synthesized side has no n-grams.
inline std::optional<double> overlap(const std::vector<std::string>& synth, const std::vector<std::string>& ref, int n) {
  const auto s = ngram_set(synth, n);
  const auto r = ngram_set(ref, n);
  if (s.empty()) return std::nullopt;
  std::size_t shared = 0;
  for (const auto& g : s) shared += r.count(g);
  return static_cast<double>(shared) / static_cast<double>(s.size());
}

inline bool subset_of_some_seed(const std::vector<std::string>& combo, const std::vector<csynth::SeedConceptSet>& seeds) {
  if (combo.empty()) return true;
  for (const auto& s : seeds) {
    bool all = true;
    for (const auto& c : combo) all = all && std::find(s.concept_ids.begin(), s.concept_ids.end(), c) != s.concept_ids.end();
    if (all) return true;
  }
  return false;
}

}  // namespace oracle
