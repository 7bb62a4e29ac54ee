#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conceptsynth/analytics.hpp"
#include "conceptsynth/backends.hpp"
#include "conceptsynth/extraction.hpp"
#include "json.hpp"

namespace csynth {

struct RunConfig {
  struct Paths {
    std::filesystem::path seed_corpus;
    std::filesystem::path run_dir;
    std::optional<std::filesystem::path> templates_dir;
    std::optional<std::filesystem::path> reference_corpus;  // decontamination reference, seed-record format
    std::optional<std::filesystem::path> gold_labels;
  } paths;

  std::uint64_t random_seed = 0;
  std::vector<BackendDescriptor> backends;

  struct Extraction {
    SimilarityThresholds thresholds;
    std::size_t max_concepts = kMaxConceptsPerSeed;
    std::optional<std::string> reviewer;  // backend_id of the quality/synonym judge; default first judge
  } extraction;

  struct Graph {
    double hub_fraction = 0.01;
    int three_hop_min_weight = 2;
    int max_distance = 3;
    std::set<int> community_sizes{3, 4};
    std::optional<std::size_t> community_cap;
    std::optional<std::size_t> budget;  // per kind; nullopt keeps every combination
    std::map<std::string, std::size_t> kind_budgets;  // overrides `budget` for one kind
  } graph;

  struct Evaluation {
    double problem_threshold = 0.85;
  } evaluation;

  struct Analysis {
    std::vector<int> ngram_sizes{8, 10, 13, 15};
    std::size_t top_k = 5;
    bool adherence = true;
    std::optional<double> adherence_tolerance;
    std::map<std::string, CostModel> cost_models;
  } analysis;

  // Operational knobs. They never change results, so they stay out of the fingerprint.
  struct Runtime {
    std::size_t max_in_flight = 8;
    std::size_t checkpoint_every = 16;
    std::optional<std::size_t> interrupt_after;
  } runtime;

  // Throws ConfigError on out-of-range values or inconsistent backends.
  void validate() const;

  // Backends for one role in declaration order.
  std::vector<BackendDescriptor> with_role(Role role) const;
  // Throws ConfigError unless every listed role has a backend.
  void require_roles(const std::vector<Role>& roles, const std::string& stage) const;
};

// Parses a config document. Unknown keys are rejected so typos do not silently fall back to defaults.
RunConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& config);

// Reads a JSON config file; relative paths inside it resolve against the file's directory.
nlohmann::json load_config_document(const std::filesystem::path& path);

// Sets a dotted key ("graph.hub_fraction") to a value. The value is parsed as JSON when it can be,
// otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

// SHA-256 over the canonical config minus the runtime section and run directory.
std::string config_fingerprint(const RunConfig& config);

}  // namespace csynth
