#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conceptsynth/backends.hpp"
#include "conceptsynth/graph.hpp"
#include "conceptsynth/prompts.hpp"
#include "json.hpp"

namespace csynth {

double expansion_ratio(std::size_t n_synth, std::size_t n_seed);

inline constexpr double kSimilarityBinWidth = 0.05;
inline constexpr std::size_t kSimilarityBins = 20;

struct SimilarityReport {
  std::vector<double> per_item_max_cosine;
  std::vector<std::size_t> histogram;  // kSimilarityBins bins of width 0.05 over [0, 1]
  std::vector<double> cdf;             // cumulative fraction at each bin's upper edge
  double mean = 0.0;
  double median = 0.0;
};

// Bin index for a score: floor(score / 0.05), with negatives in bin 0 and 1.0 in the last bin.
std::size_t similarity_bin(double score);

SimilarityReport summarize_similarity(std::vector<double> per_item_max_cosine);

// Per synthesized item: max cosine over all seed vectors. Vectors must be unit length.
SimilarityReport similarity_distribution(const std::vector<std::vector<float>>& synth_vectors,
                                         const std::vector<std::vector<float>>& seed_vectors);
SimilarityReport similarity_distribution(const std::vector<std::string>& synth_texts,
                                         const std::vector<std::string>& seed_texts, Backend& embedder,
                                         TokenUsage* usage = nullptr, std::size_t batch_size = 256);

// Fraction of items whose concept set is not inside any seed's concept set. 0 for no items.
double novelty_rate(const std::vector<std::vector<std::string>>& item_concept_sets,
                    const std::vector<SeedConceptSet>& seed_sets);

struct CostModel {
  enum class Mode { kTokenPriced, kGpuHourly };
  Mode mode = Mode::kTokenPriced;
  double input_price_per_million = 0.0;
  double output_price_per_million = 0.0;
  double gpu_rate_per_hour = 0.0;
  double gpu_count = 0.0;
  double hours = 0.0;
  std::int64_t sample_count = 1;

  void validate() const;
};

// Per-sample cost. Token mode prices the per-sample token counts; GPU mode amortizes the rental
// over the sample count and ignores the token arguments.
double cost_report(const CostModel& model, double tokens_in_per_sample, double tokens_out_per_sample);

struct NgramOverlap {
  int n = 0;
  std::optional<double> fraction;  // nullopt when the synthesized side has no n-grams
  std::size_t synth_distinct = 0;
  std::size_t shared_distinct = 0;
  std::vector<std::pair<std::string, std::size_t>> top_shared;  // by synthesized-side frequency
};

struct DecontaminationReport {
  std::vector<NgramOverlap> per_n;
};

// Distinct synthesized n-grams also present in the reference, over distinct synthesized n-grams.
// Texts are normalized (lowercase, punctuation removed) and split on whitespace.
DecontaminationReport ngram_overlap(const std::vector<std::string>& synth_texts,
                                    const std::vector<std::string>& reference_texts, const std::vector<int>& ns,
                                    std::size_t top_k = 5);

struct AdherenceInput {
  std::string item_id;
  std::vector<std::string> concepts;  // input concept texts
  std::string question;
};

struct AdherenceReport {
  double full_match_ratio = 0.0;
  double partial_match_ratio = 0.0;
  std::size_t evaluated = 0;
  std::size_t full_matches = 0;
  std::size_t partial_matches = 0;
  std::size_t excluded = 0;
};

// Case-insensitive, whitespace-collapsed form used for adherence matching.
std::string adherence_key(std::string_view concept_text);

// Counts input concepts that reappear among re-extracted phrases. A nullopt extraction marks an
// item whose re-extraction failed; it is excluded from both ratios. When `matcher` is given it is
// consulted for pairs that are not equal after canonicalization.
using ConceptMatcher = std::function<bool(const std::string& input, const std::string& extracted)>;
AdherenceReport adherence_from_extractions(const std::vector<AdherenceInput>& items,
                                           const std::vector<std::optional<std::vector<std::string>>>& extracted,
                                           const ConceptMatcher& matcher = {});

// Re-extracts concepts from each question with the extractor backend, then scores adherence.
// With `tolerance` and an embedder, phrases at cosine >= tolerance also count as matches.
AdherenceReport adherence_report(const std::vector<AdherenceInput>& items, Backend& extractor,
                                 const PromptLibrary& prompts, std::optional<double> tolerance = std::nullopt,
                                 Backend* embedder = nullptr, std::size_t max_in_flight = 8,
                                 TokenUsage* usage = nullptr);

void to_json(nlohmann::json& j, const SimilarityReport& r);
void to_json(nlohmann::json& j, const DecontaminationReport& r);
void to_json(nlohmann::json& j, const AdherenceReport& r);

// Per-bin CSV ("bin_lower,bin_upper,count,cdf") for external plotting.
std::string similarity_histogram_csv(const SimilarityReport& r);

struct StageCounters {
  std::int64_t input = 0;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  std::int64_t failed = 0;
  std::int64_t dropped = 0;
};

struct KindScore {
  std::int64_t count = 0;
  double mean_weighted_score = 0.0;
};

struct RunReportInputs {
  std::size_t seed_count = 0;
  std::size_t synthesized_count = 0;  // items that passed every filter
  std::map<std::string, StageCounters> stages;
  std::map<std::string, std::int64_t> combination_counts;  // per kind, after sampling
  std::optional<double> novelty;
  std::optional<SimilarityReport> similarity;
  std::optional<nlohmann::json> cost;
  std::optional<DecontaminationReport> decontamination;
  std::optional<AdherenceReport> adherence;
  std::optional<std::map<std::string, KindScore>> hop_quality;
  std::map<std::string, TokenUsage> token_usage;  // per stage
};

// One structured document; sections that were not computed read {"status": "not computed"}.
nlohmann::json run_report(const RunReportInputs& in);

}  // namespace csynth
