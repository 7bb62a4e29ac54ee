#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "conceptsynth/backends.hpp"
#include "conceptsynth/prompts.hpp"
#include "conceptsynth/types.hpp"

namespace csynth {

struct SimilarityThresholds {
  double same = 0.90;   // cosine >= same: merged without a judge
  double check = 0.70;  // check <= cosine < same: judge decides
};

enum class SimilarityBand { kDistinct, kJudgeChecked, kSame };

std::string_view to_string(SimilarityBand b);
SimilarityBand parse_similarity_band(std::string_view s);

SimilarityBand classify_band(double cosine, const SimilarityThresholds& t = {});

struct SimilarityVerdict {
  std::string first;   // smaller concept id
  std::string second;  // larger concept id
  double cosine = 0.0;
  SimilarityBand band = SimilarityBand::kDistinct;
  std::optional<bool> judge_confirmed;  // set only for judge_checked pairs

  bool merges() const { return band == SimilarityBand::kSame || (band == SimilarityBand::kJudgeChecked && judge_confirmed.value_or(false)); }
};

struct ConceptCluster {
  std::string cluster_id;
  std::set<std::string> member_ids;
  std::string representative_id;
};

enum class QualityCategory { kOk, kVague, kIncorrect, kOverlyDetailed };

std::string_view to_string(QualityCategory c);

struct QualityVerdict {
  std::string concept_id;
  QualityCategory category = QualityCategory::kOk;
  bool kept = true;
  bool review_flag = false;  // judge reply was unparseable; kept by default
};

// Trim and collapse whitespace. Case is preserved.
std::string canonicalize_concept(std::string_view text);

// Content-addressed id for a canonical concept phrase.
std::string concept_id_for(std::string_view canonical_text);

struct ParsedConcepts {
  std::vector<std::string> concepts;
  std::vector<std::string> warnings;
};

// Reads a numbered list ("1. X", "2) X"), falling back to bullets ("- X", "* X").
// Drops duplicates; keeps the first `max_concepts` with a warning. Throws ExtractionError when
// nothing parses.
ParsedConcepts parse_concept_list(std::string_view output, std::size_t max_concepts = kMaxConceptsPerSeed);

struct ExtractionResult {
  std::vector<std::string> concepts;
  std::vector<std::string> warnings;
  TokenUsage usage;
};

ExtractionResult extract_concepts(const SeedExample& seed, Backend& extractor, const PromptLibrary& prompts,
                                  std::size_t max_concepts = kMaxConceptsPerSeed);

QualityVerdict review_concept(const KeyConcept& concept_entry, Backend& judge, const PromptLibrary& prompts,
                              TokenUsage* usage = nullptr);

// Labels every concept kept or rejected. Calls run concurrently, results in input order.
std::vector<QualityVerdict> filter_low_quality(const std::vector<KeyConcept>& concepts, Backend& judge,
                                               const PromptLibrary& prompts, std::size_t max_in_flight = 8);

// One verdict per unordered pair, cosine over unit vectors, bands only (no judge yet).
std::vector<SimilarityVerdict> pairwise_similarity(const std::vector<std::string>& ids,
                                                   const std::vector<std::vector<float>>& unit_vectors,
                                                   const SimilarityThresholds& t = {});
std::vector<SimilarityVerdict> pairwise_similarity(const std::vector<KeyConcept>& concepts, Backend& embedder,
                                                   const SimilarityThresholds& t = {},
                                                   TokenUsage* usage = nullptr);

// Asks the judge about one judge_checked pair. Unparseable replies count as "not synonyms".
bool confirm_synonym(std::string_view first_text, std::string_view second_text, Backend& judge,
                     const PromptLibrary& prompts, TokenUsage* usage = nullptr);

// Fills judge_confirmed for every verdict; all inputs must be judge_checked.
std::vector<SimilarityVerdict> confirm_synonyms(std::vector<SimilarityVerdict> verdicts,
                                                const std::map<std::string, std::string>& texts, Backend& judge,
                                                const PromptLibrary& prompts, std::size_t max_in_flight = 8);

// Connected components of the merge relation. Singletons become their own clusters.
// Result is sorted by smallest member id and independent of input order.
std::vector<ConceptCluster> build_clusters(const std::vector<std::string>& concept_ids,
                                           const std::vector<SimilarityVerdict>& verdicts);

std::string cluster_id_for(const std::set<std::string>& member_ids);

struct RepresentativeChoice {
  enum class Kind { kMember, kSynthetic, kFallback } kind = Kind::kMember;
  std::string member_id;       // kMember / kFallback
  std::string synthetic_text;  // kSynthetic
};

// Asks the judge for a cluster's representative. Singletons skip the judge. Any failure falls back
// to the shortest member text, ties by id.
RepresentativeChoice choose_representative(const ConceptCluster& cluster, const std::map<std::string, KeyConcept>& concepts,
                                           Backend& judge, const PromptLibrary& prompts, TokenUsage* usage = nullptr);

std::string fallback_representative(const ConceptCluster& cluster, const std::map<std::string, KeyConcept>& concepts);

struct KnowledgeBase {
  std::vector<ConceptCluster> clusters;
  std::vector<KeyConcept> concepts;  // members (clustered/representative) plus synthetic representatives, by id
};

// Applies representative choices (one per cluster, same order) to produce the final statuses.
KnowledgeBase apply_representatives(std::vector<ConceptCluster> clusters,
                                     const std::map<std::string, KeyConcept>& kept_concepts,
                                     const std::vector<RepresentativeChoice>& choices);

KnowledgeBase select_representatives(std::vector<ConceptCluster> clusters,
                                     const std::map<std::string, KeyConcept>& kept_concepts, Backend& judge,
                                     const PromptLibrary& prompts, std::size_t max_in_flight = 8);

// Maps each seed's raw concept ids onto representatives: rejected ids dropped, duplicates removed,
// first-seen order kept, at most kMaxConceptsPerSeed.
std::vector<std::string> map_to_representatives(const std::vector<std::string>& raw_ids,
                                                const std::map<std::string, std::string>& representative_of);

// concept id -> representative id, for every clustered or representative concept.
std::map<std::string, std::string> representative_index(const KnowledgeBase& kb);

void to_json(nlohmann::json& j, const SimilarityVerdict& v);
void from_json(const nlohmann::json& j, SimilarityVerdict& v);
void to_json(nlohmann::json& j, const ConceptCluster& c);
void from_json(const nlohmann::json& j, ConceptCluster& c);
void to_json(nlohmann::json& j, const RepresentativeChoice& c);
void from_json(const nlohmann::json& j, RepresentativeChoice& c);

}  // namespace csynth
