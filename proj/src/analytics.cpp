#include "conceptsynth/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "conceptsynth/concurrency.hpp"
#include "conceptsynth/error.hpp"
#include "conceptsynth/extraction.hpp"
#include "conceptsynth/text.hpp"

namespace csynth {
namespace {

using nlohmann::json;

json not_computed() { return json{{"status", "not computed"}}; }

std::vector<std::vector<float>> embed_all(const std::vector<std::string>& texts, Backend& embedder, TokenUsage* usage,
                                          std::size_t batch_size) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch_size) {
    const std::size_t end = std::min(texts.size(), start + batch_size);
    std::vector<std::string> chunk(texts.begin() + static_cast<long>(start), texts.begin() + static_cast<long>(end));
    auto batch = embedder.embed(chunk);
    if (usage) *usage += batch.usage;
    for (auto& v : batch.vectors) out.push_back(std::move(v));
  }
  return out;
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace

double expansion_ratio(std::size_t n_synth, std::size_t n_seed) {
  if (n_seed == 0) throw ValidationError("expansion_ratio: seed count must be >= 1");
  return static_cast<double>(n_synth) / static_cast<double>(n_seed);
}

std::size_t similarity_bin(double score) {
  if (!(score > 0.0)) return 0;
  // The epsilon keeps exact edges such as 0.6 out of the bin below (0.6 / 0.05 = 11.999...).
  const auto bin = static_cast<std::size_t>(std::floor(score / kSimilarityBinWidth + 1e-9));
  return std::min(bin, kSimilarityBins - 1);
}

SimilarityReport summarize_similarity(std::vector<double> per_item_max_cosine) {
  SimilarityReport r;
  r.per_item_max_cosine = std::move(per_item_max_cosine);
  r.histogram.assign(kSimilarityBins, 0);
  r.cdf.assign(kSimilarityBins, 0.0);
  const std::size_t n = r.per_item_max_cosine.size();
  if (n == 0) return r;
  for (double s : r.per_item_max_cosine) ++r.histogram[similarity_bin(s)];
  std::size_t running = 0;
  for (std::size_t b = 0; b < kSimilarityBins; ++b) {
    running += r.histogram[b];
    r.cdf[b] = static_cast<double>(running) / static_cast<double>(n);
  }
  r.mean = std::accumulate(r.per_item_max_cosine.begin(), r.per_item_max_cosine.end(), 0.0) / static_cast<double>(n);
  std::vector<double> sorted = r.per_item_max_cosine;
  std::sort(sorted.begin(), sorted.end());
  r.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return r;
}

SimilarityReport similarity_distribution(const std::vector<std::vector<float>>& synth_vectors,
                                         const std::vector<std::vector<float>>& seed_vectors) {
  if (synth_vectors.empty() || seed_vectors.empty()) {
    throw ValidationError("similarity_distribution: both corpora must be nonempty");
  }
  std::vector<double> scores;
  scores.reserve(synth_vectors.size());
  for (const auto& s : synth_vectors) {
    double best = -1.0;
    for (const auto& seed : seed_vectors) {
      if (seed.size() != s.size()) throw ValidationError("similarity_distribution: dimension mismatch");
      best = std::max(best, dot(s, seed));
    }
    scores.push_back(std::clamp(best, -1.0, 1.0));
  }
  return summarize_similarity(std::move(scores));
}

SimilarityReport similarity_distribution(const std::vector<std::string>& synth_texts,
                                         const std::vector<std::string>& seed_texts, Backend& embedder,
                                         TokenUsage* usage, std::size_t batch_size) {
  if (synth_texts.empty() || seed_texts.empty()) {
    throw ValidationError("similarity_distribution: both corpora must be nonempty");
  }
  return similarity_distribution(embed_all(synth_texts, embedder, usage, batch_size),
                                 embed_all(seed_texts, embedder, usage, batch_size));
}

double novelty_rate(const std::vector<std::vector<std::string>>& item_concept_sets,
                    const std::vector<SeedConceptSet>& seed_sets) {
  if (item_concept_sets.empty()) return 0.0;
  const auto novel = std::count_if(item_concept_sets.begin(), item_concept_sets.end(),
                                   [&](const auto& ids) { return is_novel(ids, seed_sets); });
  return static_cast<double>(novel) / static_cast<double>(item_concept_sets.size());
}

void CostModel::validate() const {
  for (double v : {input_price_per_million, output_price_per_million, gpu_rate_per_hour, gpu_count, hours}) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("cost model inputs must be finite and nonnegative");
  }
  if (sample_count < 1) throw ValidationError("cost model sample_count must be >= 1");
}

double cost_report(const CostModel& model, double tokens_in_per_sample, double tokens_out_per_sample) {
  model.validate();
  if (model.mode == CostModel::Mode::kGpuHourly) {
    return model.gpu_rate_per_hour * model.gpu_count * model.hours / static_cast<double>(model.sample_count);
  }
  if (tokens_in_per_sample < 0 || tokens_out_per_sample < 0) throw ValidationError("token counts must be nonnegative");
  return model.input_price_per_million * tokens_in_per_sample / 1e6 +
         model.output_price_per_million * tokens_out_per_sample / 1e6;
}

DecontaminationReport ngram_overlap(const std::vector<std::string>& synth_texts,
                                    const std::vector<std::string>& reference_texts, const std::vector<int>& ns,
                                    std::size_t top_k) {
  if (ns.empty()) throw ValidationError("ngram_overlap: no n values given");
  for (int n : ns) {
    if (n < 1) throw ValidationError("ngram_overlap: n must be >= 1");
  }
  std::vector<std::vector<std::string>> synth_tokens, ref_tokens;
  for (const auto& t : synth_texts) synth_tokens.push_back(normalized_tokens(t));
  for (const auto& t : reference_texts) ref_tokens.push_back(normalized_tokens(t));

  auto gram = [](const std::vector<std::string>& toks, std::size_t at, int n) {
    std::string g = toks[at];
    for (int k = 1; k < n; ++k) {
      g.push_back(' ');
      g += toks[at + static_cast<std::size_t>(k)];
    }
    return g;
  };

  DecontaminationReport report;
  for (int n : ns) {
    const auto un = static_cast<std::size_t>(n);
    std::unordered_set<std::string> reference;
    for (const auto& toks : ref_tokens) {
      for (std::size_t i = 0; i + un <= toks.size(); ++i) reference.insert(gram(toks, i, n));
    }
    std::unordered_map<std::string, std::size_t> synth_counts;
    for (const auto& toks : synth_tokens) {
      for (std::size_t i = 0; i + un <= toks.size(); ++i) ++synth_counts[gram(toks, i, n)];
    }

    NgramOverlap o;
    o.n = n;
    o.synth_distinct = synth_counts.size();
    std::vector<std::pair<std::string, std::size_t>> shared;
    for (const auto& [g, count] : synth_counts) {
      if (reference.contains(g)) shared.emplace_back(g, count);
    }
    o.shared_distinct = shared.size();
    if (o.synth_distinct > 0) {
      o.fraction = static_cast<double>(o.shared_distinct) / static_cast<double>(o.synth_distinct);
    }
    std::sort(shared.begin(), shared.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (shared.size() > top_k) shared.resize(top_k);
    o.top_shared = std::move(shared);
    report.per_n.push_back(std::move(o));
  }
  return report;
}

std::string adherence_key(std::string_view concept_text) { return collapse_whitespace(ascii_lower(concept_text)); }

AdherenceReport adherence_from_extractions(const std::vector<AdherenceInput>& items,
                                           const std::vector<std::optional<std::vector<std::string>>>& extracted,
                                           const ConceptMatcher& matcher) {
  if (items.size() != extracted.size()) throw ValidationError("adherence: one extraction slot per item required");
  AdherenceReport r;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!extracted[i]) {
      ++r.excluded;
      continue;
    }
    ++r.evaluated;
    std::size_t matched = 0;
    for (const auto& input : items[i].concepts) {
      const bool hit = std::any_of(extracted[i]->begin(), extracted[i]->end(), [&](const std::string& e) {
        return adherence_key(input) == adherence_key(e) || (matcher && matcher(input, e));
      });
      if (hit) ++matched;
    }
    if (!items[i].concepts.empty() && matched == items[i].concepts.size()) ++r.full_matches;
    if (matched > 0) ++r.partial_matches;
  }
  if (r.evaluated > 0) {
    r.full_match_ratio = static_cast<double>(r.full_matches) / static_cast<double>(r.evaluated);
    r.partial_match_ratio = static_cast<double>(r.partial_matches) / static_cast<double>(r.evaluated);
  }
  return r;
}

AdherenceReport adherence_report(const std::vector<AdherenceInput>& items, Backend& extractor,
                                 const PromptLibrary& prompts, std::optional<double> tolerance, Backend* embedder,
                                 std::size_t max_in_flight, TokenUsage* usage) {
  std::vector<std::function<ExtractionResult()>> requests;
  for (const auto& item : items) {
    requests.emplace_back([&item, &extractor, &prompts] {
      SeedExample probe{item.item_id, item.question, "", {}};
      // Reverse extraction is not capped: every phrase the extractor finds may match an input.
      return extract_concepts(probe, extractor, prompts, SIZE_MAX);
    });
  }
  const auto results = run_bounded(requests, max_in_flight);
  std::vector<std::optional<std::vector<std::string>>> extracted;
  for (const auto& res : results) {
    if (res.ok()) {
      if (usage) *usage += res.value->usage;
      extracted.emplace_back(res.value->concepts);
    } else {
      extracted.emplace_back(std::nullopt);
    }
  }

  ConceptMatcher matcher;
  if (tolerance && embedder) {
    matcher = [embedder, t = *tolerance, usage](const std::string& a, const std::string& b) {
      auto batch = embedder->embed({a, b});
      if (usage) *usage += batch.usage;
      return cosine(batch.vectors[0], batch.vectors[1]) >= t;
    };
  }
  return adherence_from_extractions(items, extracted, matcher);
}

void to_json(json& j, const SimilarityReport& r) {
  json bins = json::array();
  for (std::size_t b = 0; b < r.histogram.size(); ++b) {
    bins.push_back(json{{"lower", static_cast<double>(b) * kSimilarityBinWidth},
                        {"upper", static_cast<double>(b + 1) * kSimilarityBinWidth},
                        {"count", r.histogram[b]},
                        {"cdf", r.cdf[b]}});
  }
  j = json{{"items", r.per_item_max_cosine.size()}, {"mean", r.mean}, {"median", r.median}, {"bins", bins}};
}

void to_json(json& j, const DecontaminationReport& r) {
  j = json::array();
  for (const auto& o : r.per_n) {
    json top = json::array();
    for (const auto& [g, c] : o.top_shared) top.push_back(json{{"ngram", g}, {"count", c}});
    j.push_back(json{{"n", o.n},
                     {"overlap_fraction", o.fraction ? json(*o.fraction) : json("undefined")},
                     {"synth_distinct", o.synth_distinct},
                     {"shared_distinct", o.shared_distinct},
                     {"top_shared", top}});
  }
}

void to_json(json& j, const AdherenceReport& r) {
  j = json{{"full_match_ratio", r.full_match_ratio},
           {"partial_match_ratio", r.partial_match_ratio},
           {"evaluated", r.evaluated},
           {"full_matches", r.full_matches},
           {"partial_matches", r.partial_matches},
           {"excluded", r.excluded}};
}

std::string similarity_histogram_csv(const SimilarityReport& r) {
  std::string out = "bin_lower,bin_upper,count,cdf\n";
  char line[128];
  for (std::size_t b = 0; b < r.histogram.size(); ++b) {
    std::snprintf(line, sizeof line, "%.2f,%.2f,%zu,%.6f\n", static_cast<double>(b) * kSimilarityBinWidth,
                  static_cast<double>(b + 1) * kSimilarityBinWidth, r.histogram[b], r.cdf[b]);
    out += line;
  }
  return out;
}

json run_report(const RunReportInputs& in) {
  json report;
  report["seed_count"] = in.seed_count;
  report["synthesized_count"] = in.synthesized_count;
  report["expansion_ratio"] =
      in.seed_count > 0 ? json(expansion_ratio(in.synthesized_count, in.seed_count)) : not_computed();

  json stages = json::object();
  for (const auto& [name, c] : in.stages) {
    stages[name] = json{{"input", c.input},
                        {"accepted", c.accepted},
                        {"rejected", c.rejected},
                        {"failed", c.failed},
                        {"dropped", c.dropped},
                        {"acceptance_rate", c.input > 0 ? static_cast<double>(c.accepted) / static_cast<double>(c.input) : 0.0}};
  }
  report["stages"] = stages;

  json kinds = json::object();
  for (const char* kind : {"one_hop", "two_hop", "three_hop", "community"}) kinds[kind] = 0;
  for (const auto& [kind, n] : in.combination_counts) kinds[kind] = n;
  report["combinations"] = kinds;

  report["novelty_rate"] = in.novelty ? json(*in.novelty) : not_computed();
  report["similarity"] = in.similarity ? json(*in.similarity) : not_computed();
  report["cost"] = in.cost ? *in.cost : not_computed();
  report["decontamination"] = in.decontamination ? json(*in.decontamination) : not_computed();
  report["adherence"] = in.adherence ? json(*in.adherence) : not_computed();
  if (in.hop_quality) {
    json hq = json::object();
    for (const auto& [kind, s] : *in.hop_quality) {
      hq[kind] = json{{"count", s.count}, {"mean_weighted_score", s.mean_weighted_score}};
    }
    report["hop_quality"] = hq;
  } else {
    report["hop_quality"] = not_computed();
  }
  json usage = json::object();
  TokenUsage total;
  for (const auto& [stage, u] : in.token_usage) {
    usage[stage] = u;
    total += u;
  }
  usage["total"] = total;
  report["token_usage"] = usage;
  return report;
}

}  // namespace csynth
