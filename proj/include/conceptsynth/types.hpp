#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace csynth {

inline constexpr std::string_view kSyntheticSummary = "synthetic-summary";
inline constexpr std::size_t kMaxConceptsPerSeed = 5;

struct SeedExample {
  std::string id;
  std::string question;
  std::string solution;
  std::vector<std::string> concept_ids;  // representative concepts, at most 5, no duplicates
};

enum class ConceptStatus { kRaw, kRejected, kClustered, kRepresentative };

struct KeyConcept {
  std::string id;
  std::string text;
  ConceptStatus status = ConceptStatus::kRaw;
  std::optional<std::string> cluster_id;
  // Seed ids the concept was extracted from, or the single marker "synthetic-summary".
  std::vector<std::string> provenance;

  bool is_synthetic() const { return provenance.size() == 1 && provenance.front() == kSyntheticSummary; }
};

enum class CombinationKind { kOneHop, kTwoHop, kThreeHop, kCommunity, kDistant };

struct ConceptCombination {
  std::string id;
  CombinationKind kind = CombinationKind::kOneHop;
  std::vector<std::string> concept_ids;
  double weight = 0.0;
  // Hop kinds only: one shortest path realizing the distance, endpoints included.
  std::vector<std::string> witness;

  // Hop count for pair kinds, 0 for communities.
  int hops() const { return witness.empty() ? 0 : static_cast<int>(witness.size()) - 1; }
};

enum class Difficulty { kLow, kMedium, kHigh };

// Ordered lifecycle. generation_failed and solution_failed are terminal error states.
enum class ItemStatus {
  kGenerationFailed,
  kGenerated,
  kProblemRejected,
  kProblemAccepted,
  kSolutionFailed,
  kSolutionRejected,
  kSolutionAccepted,
};

struct SynthesizedItem {
  std::string id;
  std::string combination_id;
  CombinationKind kind = CombinationKind::kOneHop;
  std::vector<std::string> concept_ids;
  std::vector<std::string> concept_texts;
  std::string question;
  std::optional<Difficulty> difficulty;
  std::optional<std::string> solution;
  std::map<std::string, double> problem_scores;
  std::optional<double> weighted_score;
  std::map<std::string, int> solution_votes;
  ItemStatus status = ItemStatus::kGenerated;
  std::vector<std::string> review_flags;

  // Throws ValidationError when a field combination breaks the item invariants.
  void validate() const;
};

struct StageCheckpoint {
  std::string stage_name;
  std::set<std::string> completed_item_ids;
  std::string config_fingerprint;

  bool operator==(const StageCheckpoint&) const = default;
};

std::string_view to_string(ConceptStatus s);
std::string_view to_string(CombinationKind k);
std::string_view to_string(Difficulty d);
std::string_view to_string(ItemStatus s);

ConceptStatus parse_concept_status(std::string_view s);
CombinationKind parse_combination_kind(std::string_view s);
Difficulty parse_difficulty(std::string_view s);
ItemStatus parse_item_status(std::string_view s);

// Lifecycle stage: 0 generated, 1 problem verdict, 2 solution verdict. -1 for generation_failed.
int status_stage(ItemStatus s);
// True when `to` is reachable from `from` along the lifecycle without stepping backwards.
bool is_forward_transition(ItemStatus from, ItemStatus to);

bool operator==(const SeedExample& a, const SeedExample& b);
bool operator==(const KeyConcept& a, const KeyConcept& b);
bool operator==(const ConceptCombination& a, const ConceptCombination& b);
bool operator==(const SynthesizedItem& a, const SynthesizedItem& b);

void to_json(nlohmann::json& j, const SeedExample& v);
void from_json(const nlohmann::json& j, SeedExample& v);
void to_json(nlohmann::json& j, const KeyConcept& v);
void from_json(const nlohmann::json& j, KeyConcept& v);
void to_json(nlohmann::json& j, const ConceptCombination& v);
void from_json(const nlohmann::json& j, ConceptCombination& v);
void to_json(nlohmann::json& j, const SynthesizedItem& v);
void from_json(const nlohmann::json& j, SynthesizedItem& v);
void to_json(nlohmann::json& j, const StageCheckpoint& v);
void from_json(const nlohmann::json& j, StageCheckpoint& v);

}  // namespace csynth
