#include "conceptsynth/types.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "conceptsynth/error.hpp"

namespace csynth {
namespace {

using nlohmann::json;

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view text, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == text) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " \"" + std::string(text) + "\"");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::array<std::pair<Enum, std::string_view>, N>& table) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::array<std::pair<ConceptStatus, std::string_view>, 4> kConceptStatus{{
    {ConceptStatus::kRaw, "raw"},
    {ConceptStatus::kRejected, "rejected"},
    {ConceptStatus::kClustered, "clustered"},
    {ConceptStatus::kRepresentative, "representative"},
}};

constexpr std::array<std::pair<CombinationKind, std::string_view>, 5> kKinds{{
    {CombinationKind::kOneHop, "one_hop"},
    {CombinationKind::kTwoHop, "two_hop"},
    {CombinationKind::kThreeHop, "three_hop"},
    {CombinationKind::kCommunity, "community"},
    {CombinationKind::kDistant, "distant"},
}};

constexpr std::array<std::pair<Difficulty, std::string_view>, 3> kDifficulty{{
    {Difficulty::kLow, "low"},
    {Difficulty::kMedium, "medium"},
    {Difficulty::kHigh, "high"},
}};

constexpr std::array<std::pair<ItemStatus, std::string_view>, 7> kItemStatus{{
    {ItemStatus::kGenerationFailed, "generation_failed"},
    {ItemStatus::kGenerated, "generated"},
    {ItemStatus::kProblemRejected, "problem_rejected"},
    {ItemStatus::kProblemAccepted, "problem_accepted"},
    {ItemStatus::kSolutionFailed, "solution_failed"},
    {ItemStatus::kSolutionRejected, "solution_rejected"},
    {ItemStatus::kSolutionAccepted, "solution_accepted"},
}};

// Reads a required field, reporting the field name on absence or type mismatch.
template <typename T>
T required(const json& j, const char* field) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw ValidationError(std::string("missing field \"") + field + "\"");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field \"") + field + "\" has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("field \"") + field + "\" has the wrong type");
  }
}

bool has_duplicates(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace

std::string_view to_string(ConceptStatus s) { return enum_name(s, kConceptStatus); }
std::string_view to_string(CombinationKind k) { return enum_name(k, kKinds); }
std::string_view to_string(Difficulty d) { return enum_name(d, kDifficulty); }
std::string_view to_string(ItemStatus s) { return enum_name(s, kItemStatus); }

ConceptStatus parse_concept_status(std::string_view s) { return parse_enum(s, kConceptStatus, "concept status"); }
CombinationKind parse_combination_kind(std::string_view s) { return parse_enum(s, kKinds, "combination kind"); }
Difficulty parse_difficulty(std::string_view s) { return parse_enum(s, kDifficulty, "difficulty"); }
ItemStatus parse_item_status(std::string_view s) { return parse_enum(s, kItemStatus, "item status"); }

int status_stage(ItemStatus s) {
  switch (s) {
    case ItemStatus::kGenerationFailed:
      return -1;
    case ItemStatus::kGenerated:
      return 0;
    case ItemStatus::kProblemRejected:
    case ItemStatus::kProblemAccepted:
      return 1;
    case ItemStatus::kSolutionFailed:
    case ItemStatus::kSolutionRejected:
    case ItemStatus::kSolutionAccepted:
      return 2;
  }
  return -1;
}

bool is_forward_transition(ItemStatus from, ItemStatus to) {
  if (from == to) return true;
  switch (from) {
    case ItemStatus::kGenerated:
      return to != ItemStatus::kGenerationFailed;
    case ItemStatus::kProblemAccepted:
      return status_stage(to) == 2;
    default:
      // Rejections and failures are terminal.
      return false;
  }
}

void SynthesizedItem::validate() const {
  if (id.empty()) throw ValidationError("item id is empty");
  if (weighted_score.has_value() != !problem_scores.empty()) {
    throw ValidationError("item " + id + ": weighted_score must be present iff problem_scores is nonempty");
  }
  if (!solution_votes.empty() && status_stage(status) < 2) {
    throw ValidationError("item " + id + ": solution votes recorded before the problem was accepted");
  }
  if (weighted_score && (*weighted_score < 0.0 || *weighted_score > 1.0)) {
    throw ValidationError("item " + id + ": weighted_score outside [0,1]");
  }
  for (const auto& [judge, vote] : solution_votes) {
    if (vote != 0 && vote != 1) throw ValidationError("item " + id + ": vote from " + judge + " is not 0/1");
  }
}

bool operator==(const SeedExample& a, const SeedExample& b) {
  return a.id == b.id && a.question == b.question && a.solution == b.solution && a.concept_ids == b.concept_ids;
}

bool operator==(const KeyConcept& a, const KeyConcept& b) {
  return a.id == b.id && a.text == b.text && a.status == b.status && a.cluster_id == b.cluster_id &&
         a.provenance == b.provenance;
}

bool operator==(const ConceptCombination& a, const ConceptCombination& b) {
  return a.id == b.id && a.kind == b.kind && a.concept_ids == b.concept_ids && a.weight == b.weight &&
         a.witness == b.witness;
}

bool operator==(const SynthesizedItem& a, const SynthesizedItem& b) {
  return a.id == b.id && a.combination_id == b.combination_id && a.kind == b.kind &&
         a.concept_ids == b.concept_ids && a.concept_texts == b.concept_texts && a.question == b.question &&
         a.difficulty == b.difficulty && a.solution == b.solution && a.problem_scores == b.problem_scores &&
         a.weighted_score == b.weighted_score && a.solution_votes == b.solution_votes && a.status == b.status &&
         a.review_flags == b.review_flags;
}

void to_json(json& j, const SeedExample& v) {
  j = json{{"id", v.id}, {"question", v.question}, {"solution", v.solution}, {"concept_ids", v.concept_ids}};
}

void from_json(const json& j, SeedExample& v) {
  v.id = required<std::string>(j, "id");
  v.question = required<std::string>(j, "question");
  v.solution = required<std::string>(j, "solution");
  v.concept_ids = optional_field<std::vector<std::string>>(j, "concept_ids").value_or(std::vector<std::string>{});
  if (v.question.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("field \"question\" is empty");
  if (v.concept_ids.size() > kMaxConceptsPerSeed) throw ValidationError("field \"concept_ids\" has more than 5 entries");
  if (has_duplicates(v.concept_ids)) throw ValidationError("field \"concept_ids\" contains duplicates");
}

void to_json(json& j, const KeyConcept& v) {
  j = json{{"id", v.id},
           {"text", v.text},
           {"status", to_string(v.status)},
           {"cluster_id", v.cluster_id ? json(*v.cluster_id) : json(nullptr)},
           {"provenance", v.provenance}};
}

void from_json(const json& j, KeyConcept& v) {
  v.id = required<std::string>(j, "id");
  v.text = required<std::string>(j, "text");
  v.status = parse_concept_status(required<std::string>(j, "status"));
  v.cluster_id = optional_field<std::string>(j, "cluster_id");
  v.provenance = required<std::vector<std::string>>(j, "provenance");
  if (v.status == ConceptStatus::kRepresentative && !v.cluster_id) {
    throw ValidationError("representative concept " + v.id + " has no cluster_id");
  }
}

void to_json(json& j, const ConceptCombination& v) {
  j = json{{"id", v.id},
           {"kind", to_string(v.kind)},
           {"concept_ids", v.concept_ids},
           {"weight", v.weight},
           {"witness", v.witness}};
}

void from_json(const json& j, ConceptCombination& v) {
  v.id = required<std::string>(j, "id");
  v.kind = parse_combination_kind(required<std::string>(j, "kind"));
  v.concept_ids = required<std::vector<std::string>>(j, "concept_ids");
  v.weight = required<double>(j, "weight");
  v.witness = optional_field<std::vector<std::string>>(j, "witness").value_or(std::vector<std::string>{});
}

void to_json(json& j, const SynthesizedItem& v) {
  j = json{{"id", v.id},
           {"combination_id", v.combination_id},
           {"kind", to_string(v.kind)},
           {"concept_ids", v.concept_ids},
           {"concept_texts", v.concept_texts},
           {"question", v.question},
           {"difficulty", v.difficulty ? json(to_string(*v.difficulty)) : json(nullptr)},
           {"solution", v.solution ? json(*v.solution) : json(nullptr)},
           {"problem_scores", v.problem_scores},
           {"weighted_score", v.weighted_score ? json(*v.weighted_score) : json(nullptr)},
           {"solution_votes", v.solution_votes},
           {"status", to_string(v.status)},
           {"review_flags", v.review_flags}};
}

void from_json(const json& j, SynthesizedItem& v) {
  v.id = required<std::string>(j, "id");
  v.combination_id = required<std::string>(j, "combination_id");
  v.kind = parse_combination_kind(required<std::string>(j, "kind"));
  v.concept_ids = required<std::vector<std::string>>(j, "concept_ids");
  v.concept_texts = optional_field<std::vector<std::string>>(j, "concept_texts").value_or(std::vector<std::string>{});
  v.question = optional_field<std::string>(j, "question").value_or("");
  auto difficulty = optional_field<std::string>(j, "difficulty");
  v.difficulty = difficulty ? std::optional(parse_difficulty(*difficulty)) : std::nullopt;
  v.solution = optional_field<std::string>(j, "solution");
  v.problem_scores = optional_field<std::map<std::string, double>>(j, "problem_scores").value_or(std::map<std::string, double>{});
  v.weighted_score = optional_field<double>(j, "weighted_score");
  v.solution_votes = optional_field<std::map<std::string, int>>(j, "solution_votes").value_or(std::map<std::string, int>{});
  v.status = parse_item_status(required<std::string>(j, "status"));
  v.review_flags = optional_field<std::vector<std::string>>(j, "review_flags").value_or(std::vector<std::string>{});
  v.validate();
}

void to_json(json& j, const StageCheckpoint& v) {
  j = json{{"stage_name", v.stage_name},
           {"completed_item_ids", v.completed_item_ids},
           {"config_fingerprint", v.config_fingerprint}};
}

void from_json(const json& j, StageCheckpoint& v) {
  v.stage_name = required<std::string>(j, "stage_name");
  v.completed_item_ids = required<std::set<std::string>>(j, "completed_item_ids");
  v.config_fingerprint = required<std::string>(j, "config_fingerprint");
}

}  // namespace csynth
