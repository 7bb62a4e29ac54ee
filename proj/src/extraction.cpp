#include "conceptsynth/extraction.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <numeric>

#include "conceptsynth/error.hpp"
#include "conceptsynth/hashing.hpp"
#include "conceptsynth/text.hpp"

namespace csynth {
namespace {

using nlohmann::json;

// "12. text" / "12) text" -> "text"
std::optional<std::string> numbered_item(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i + 1 > line.size()) return std::nullopt;
  if (line[i] != '.' && line[i] != ')') return std::nullopt;
  if (i + 1 < line.size() && line[i + 1] != ' ' && line[i + 1] != '\t') return std::nullopt;
  return std::string(line.substr(i + 1));
}

std::optional<std::string> bulleted_item(std::string_view line) {
  for (std::string_view marker : {"- ", "* ", "\xE2\x80\xA2 "}) {
    if (line.substr(0, marker.size()) == marker) return std::string(line.substr(marker.size()));
  }
  return std::nullopt;
}

std::string clean_item(std::string item) {
  item = trim(item);
  // Markdown emphasis and wrapping quotes are presentation, not part of the concept.
  for (const std::string wrap : {"**", "__", "\"", "`", "'"}) {
    if (item.size() >= 2 * wrap.size() && item.compare(0, wrap.size(), wrap) == 0 &&
        item.compare(item.size() - wrap.size(), wrap.size(), wrap) == 0) {
      item = trim(item.substr(wrap.size(), item.size() - 2 * wrap.size()));
    }
  }
  return canonicalize_concept(item);
}

constexpr std::array<std::pair<SimilarityBand, std::string_view>, 3> kBands{{
    {SimilarityBand::kDistinct, "distinct"},
    {SimilarityBand::kJudgeChecked, "judge_checked"},
    {SimilarityBand::kSame, "same"},
}};

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::string_view to_string(SimilarityBand b) {
  for (const auto& [v, n] : kBands) {
    if (v == b) return n;
  }
  return "?";
}

SimilarityBand parse_similarity_band(std::string_view s) {
  for (const auto& [v, n] : kBands) {
    if (n == s) return v;
  }
  throw ValidationError("unknown similarity band \"" + std::string(s) + "\"");
}

std::string_view to_string(QualityCategory c) {
  switch (c) {
    case QualityCategory::kOk:
      return "ok";
    case QualityCategory::kVague:
      return "vague";
    case QualityCategory::kIncorrect:
      return "incorrect";
    case QualityCategory::kOverlyDetailed:
      return "overly_detailed";
  }
  return "?";
}

SimilarityBand classify_band(double cosine, const SimilarityThresholds& t) {
  if (cosine >= t.same) return SimilarityBand::kSame;
  if (cosine >= t.check) return SimilarityBand::kJudgeChecked;
  return SimilarityBand::kDistinct;
}

std::string canonicalize_concept(std::string_view text) { return collapse_whitespace(text); }

std::string concept_id_for(std::string_view canonical_text) { return content_id("kc-", canonical_text); }

ParsedConcepts parse_concept_list(std::string_view output, std::size_t max_concepts) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= output.size()) {
      const auto end = output.find('\n', start);
      lines.push_back(trim(output.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
  }

  std::vector<std::string> items;
  for (const auto& line : lines) {
    if (auto item = numbered_item(line)) items.push_back(clean_item(*item));
  }
  if (items.empty()) {
    for (const auto& line : lines) {
      if (auto item = bulleted_item(line)) items.push_back(clean_item(*item));
    }
  }

  ParsedConcepts parsed;
  for (auto& item : items) {
    if (item.empty()) continue;
    if (std::find(parsed.concepts.begin(), parsed.concepts.end(), item) != parsed.concepts.end()) continue;
    parsed.concepts.push_back(std::move(item));
  }
  if (parsed.concepts.empty()) {
    throw ExtractionError("could not parse any concept from extractor output", std::string(output));
  }
  if (parsed.concepts.size() > max_concepts) {
    parsed.warnings.push_back("extractor returned " + std::to_string(parsed.concepts.size()) +
                              " concepts; kept the first " + std::to_string(max_concepts));
    parsed.concepts.resize(max_concepts);
  }
  return parsed;
}

ExtractionResult extract_concepts(const SeedExample& seed, Backend& extractor, const PromptLibrary& prompts,
                                  std::size_t max_concepts) {
  if (trim(seed.question).empty()) throw ValidationError("seed " + seed.id + " has an empty question");
  const std::string prompt =
      prompts.render(prompt_names::kExtractConcepts, {{"question", seed.question}, {"solution", seed.solution}});
  const auto ex = extractor.complete(prompt, for_task(Task::kExtractConcepts));
  ParsedConcepts parsed;
  try {
    parsed = parse_concept_list(ex.output, max_concepts);
  } catch (const ExtractionError& e) {
    throw ExtractionError("seed " + seed.id + ": " + e.what(), e.raw_output());
  }
  for (const auto& w : parsed.warnings) spdlog::warn("seed {}: {}", seed.id, w);
  return {std::move(parsed.concepts), std::move(parsed.warnings), ex.usage()};
}

QualityVerdict review_concept(const KeyConcept& concept_entry, Backend& judge, const PromptLibrary& prompts,
                              TokenUsage* usage) {
  const std::string prompt = prompts.render(prompt_names::kReviewConcept, {{"concept", concept_entry.text}});
  const auto ex = judge.complete(prompt, for_task(Task::kReviewConcept));
  if (usage) *usage += ex.usage();

  QualityVerdict v;
  v.concept_id = concept_entry.id;
  const auto choice = parse_last_choice(ex.output, {"ok", "vague", "incorrect", "overly_detailed"});
  if (!choice) {
    spdlog::warn("concept {}: unparseable quality review, keeping it for manual review", concept_entry.id);
    v.review_flag = true;
    return v;
  }
  if (*choice == "vague") v.category = QualityCategory::kVague;
  if (*choice == "incorrect") v.category = QualityCategory::kIncorrect;
  if (*choice == "overly_detailed") v.category = QualityCategory::kOverlyDetailed;
  v.kept = v.category == QualityCategory::kOk;
  return v;
}

std::vector<QualityVerdict> filter_low_quality(const std::vector<KeyConcept>& concepts, Backend& judge,
                                               const PromptLibrary& prompts, std::size_t max_in_flight) {
  if (concepts.empty()) throw ValidationError("filter_low_quality: no concepts given");
  std::vector<std::function<QualityVerdict()>> requests;
  for (const auto& c : concepts) {
    requests.emplace_back([&c, &judge, &prompts] { return review_concept(c, judge, prompts); });
  }
  std::vector<QualityVerdict> out;
  const auto results = run_bounded(requests, max_in_flight);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok()) {
      out.push_back(*results[i].value);
    } else {
      spdlog::warn("concept {}: quality review failed ({}), keeping it for manual review", concepts[i].id,
                   results[i].error_message);
      out.push_back({concepts[i].id, QualityCategory::kOk, true, true});
    }
  }
  return out;
}

std::vector<SimilarityVerdict> pairwise_similarity(const std::vector<std::string>& ids,
                                                   const std::vector<std::vector<float>>& unit_vectors,
                                                   const SimilarityThresholds& t) {
  if (ids.size() != unit_vectors.size()) throw ValidationError("pairwise_similarity: ids/vectors size mismatch");
  if (ids.size() < 2) throw ValidationError("pairwise_similarity: need at least two concepts");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });

  std::vector<SimilarityVerdict> out;
  out.reserve(ids.size() * (ids.size() - 1) / 2);
  for (std::size_t x = 0; x < order.size(); ++x) {
    for (std::size_t y = x + 1; y < order.size(); ++y) {
      const auto i = order[x], j = order[y];
      SimilarityVerdict v;
      v.first = ids[i];
      v.second = ids[j];
      v.cosine = cosine(unit_vectors[i], unit_vectors[j]);
      v.band = classify_band(v.cosine, t);
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::vector<SimilarityVerdict> pairwise_similarity(const std::vector<KeyConcept>& concepts, Backend& embedder,
                                                   const SimilarityThresholds& t, TokenUsage* usage) {
  if (concepts.size() < 2) throw ValidationError("pairwise_similarity: need at least two concepts");
  std::vector<std::string> ids, texts;
  for (const auto& c : concepts) {
    ids.push_back(c.id);
    texts.push_back(canonicalize_concept(c.text));
  }
  auto batch = embedder.embed(texts);
  if (usage) *usage += batch.usage;
  return pairwise_similarity(ids, batch.vectors, t);
}

bool confirm_synonym(std::string_view first_text, std::string_view second_text, Backend& judge,
                     const PromptLibrary& prompts, TokenUsage* usage) {
  const std::string prompt = prompts.render(prompt_names::kConfirmSynonym,
                                            {{"concept_a", std::string(first_text)}, {"concept_b", std::string(second_text)}});
  const auto ex = judge.complete(prompt, for_task(Task::kConfirmSynonym));
  if (usage) *usage += ex.usage();
  return parse_last_yes_no(ex.output).value_or(false);
}

std::vector<SimilarityVerdict> confirm_synonyms(std::vector<SimilarityVerdict> verdicts,
                                                const std::map<std::string, std::string>& texts, Backend& judge,
                                                const PromptLibrary& prompts, std::size_t max_in_flight) {
  std::vector<std::function<bool()>> requests;
  for (const auto& v : verdicts) {
    if (v.band != SimilarityBand::kJudgeChecked) {
      throw ValidationError("confirm_synonyms: pair " + v.first + "/" + v.second + " is not in the judge_checked band");
    }
    const auto a = texts.find(v.first), b = texts.find(v.second);
    if (a == texts.end() || b == texts.end()) throw ValidationError("confirm_synonyms: missing concept text");
    requests.emplace_back([&, ta = a->second, tb = b->second] { return confirm_synonym(ta, tb, judge, prompts); });
  }
  const auto results = run_bounded(requests, max_in_flight);
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    // Transport failures are conservative too: never merge on an unanswered question.
    verdicts[i].judge_confirmed = results[i].ok() ? *results[i].value : false;
  }
  return verdicts;
}

std::string cluster_id_for(const std::set<std::string>& member_ids) {
  std::string payload;
  for (const auto& id : member_ids) {
    payload += id;
    payload += '\n';
  }
  return content_id("cl-", payload);
}

std::vector<ConceptCluster> build_clusters(const std::vector<std::string>& concept_ids,
                                           const std::vector<SimilarityVerdict>& verdicts) {
  std::vector<std::string> ids = concept_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  auto index_of = [&](const std::string& id) {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) throw ValidationError("build_clusters: verdict references unknown concept " + id);
    return static_cast<std::size_t>(it - ids.begin());
  };

  DisjointSets sets(ids.size());
  for (const auto& v : verdicts) {
    if (v.merges()) sets.unite(index_of(v.first), index_of(v.second));
  }

  std::map<std::size_t, std::set<std::string>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[sets.find(i)].insert(ids[i]);

  std::vector<ConceptCluster> out;
  out.reserve(groups.size());
  for (auto& [root, members] : groups) {
    ConceptCluster c;
    c.cluster_id = cluster_id_for(members);
    c.member_ids = std::move(members);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return *a.member_ids.begin() < *b.member_ids.begin(); });
  return out;
}

std::string fallback_representative(const ConceptCluster& cluster, const std::map<std::string, KeyConcept>& concepts) {
  std::string best;
  std::size_t best_len = 0;
  for (const auto& id : cluster.member_ids) {
    const auto it = concepts.find(id);
    const std::size_t len = it == concepts.end() ? std::string::npos : it->second.text.size();
    if (best.empty() || len < best_len) {
      best = id;
      best_len = len;
    }
  }
  return best;
}

RepresentativeChoice choose_representative(const ConceptCluster& cluster, const std::map<std::string, KeyConcept>& concepts,
                                           Backend& judge, const PromptLibrary& prompts, TokenUsage* usage) {
  if (cluster.member_ids.empty()) throw ValidationError("cluster " + cluster.cluster_id + " has no members");
  if (cluster.member_ids.size() == 1) return {RepresentativeChoice::Kind::kMember, *cluster.member_ids.begin(), {}};

  std::vector<std::string> members(cluster.member_ids.begin(), cluster.member_ids.end());
  std::string listing;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto it = concepts.find(members[i]);
    if (it == concepts.end()) throw ValidationError("cluster member " + members[i] + " has no concept record");
    listing += std::to_string(i + 1) + ". " + it->second.text + "\n";
  }
  const RepresentativeChoice fallback{RepresentativeChoice::Kind::kFallback, fallback_representative(cluster, concepts), {}};

  std::string output;
  try {
    const auto ex = judge.complete(prompts.render(prompt_names::kChooseRepresentative, {{"members", listing}}),
                                   for_task(Task::kChooseRepresentative));
    if (usage) *usage += ex.usage();
    output = trim(ex.output);
  } catch (const BackendError& e) {
    spdlog::warn("cluster {}: representative selection failed ({}), using fallback", cluster.cluster_id, e.what());
    return fallback;
  }

  const std::string lowered = ascii_lower(output);
  if (const auto at = lowered.rfind("new:"); at != std::string::npos) {
    const std::string text = canonicalize_concept(output.substr(at + 4));
    if (text.empty()) return fallback;
    for (const auto& id : members) {
      if (concepts.at(id).text == text) return {RepresentativeChoice::Kind::kMember, id, {}};
    }
    return {RepresentativeChoice::Kind::kSynthetic, {}, text};
  }
  if (const auto n = parse_last_number(output); n && *n >= 1 && *n <= static_cast<double>(members.size()) &&
                                                *n == static_cast<double>(static_cast<long>(*n))) {
    return {RepresentativeChoice::Kind::kMember, members[static_cast<std::size_t>(*n) - 1], {}};
  }
  spdlog::warn("cluster {}: unparseable representative reply, using fallback", cluster.cluster_id);
  return fallback;
}

KnowledgeBase apply_representatives(std::vector<ConceptCluster> clusters,
                                     const std::map<std::string, KeyConcept>& kept_concepts,
                                     const std::vector<RepresentativeChoice>& choices) {
  if (clusters.size() != choices.size()) throw ValidationError("apply_representatives: one choice per cluster required");
  std::map<std::string, KeyConcept> out;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    auto& cluster = clusters[i];
    const auto& choice = choices[i];
    for (const auto& id : cluster.member_ids) {
      KeyConcept c = kept_concepts.at(id);
      c.status = ConceptStatus::kClustered;
      c.cluster_id = cluster.cluster_id;
      out[id] = std::move(c);
    }
    if (choice.kind == RepresentativeChoice::Kind::kSynthetic) {
      KeyConcept synthetic;
      synthetic.id = content_id("kc-syn-", cluster.cluster_id + "\n" + choice.synthetic_text);
      synthetic.text = choice.synthetic_text;
      synthetic.status = ConceptStatus::kRepresentative;
      synthetic.cluster_id = cluster.cluster_id;
      synthetic.provenance = {std::string(kSyntheticSummary)};
      cluster.representative_id = synthetic.id;
      out[synthetic.id] = std::move(synthetic);
    } else {
      if (!cluster.member_ids.contains(choice.member_id)) {
        throw ValidationError("representative " + choice.member_id + " is not a member of " + cluster.cluster_id);
      }
      cluster.representative_id = choice.member_id;
      out[choice.member_id].status = ConceptStatus::kRepresentative;
    }
  }
  KnowledgeBase kb;
  kb.clusters = std::move(clusters);
  for (auto& [id, c] : out) kb.concepts.push_back(std::move(c));
  return kb;
}

KnowledgeBase select_representatives(std::vector<ConceptCluster> clusters,
                                     const std::map<std::string, KeyConcept>& kept_concepts, Backend& judge,
                                     const PromptLibrary& prompts, std::size_t max_in_flight) {
  std::vector<std::function<RepresentativeChoice()>> requests;
  for (const auto& cluster : clusters) {
    requests.emplace_back([&cluster, &kept_concepts, &judge, &prompts] {
      return choose_representative(cluster, kept_concepts, judge, prompts);
    });
  }
  const auto results = run_bounded(requests, max_in_flight);
  std::vector<RepresentativeChoice> choices;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok()) {
      choices.push_back(*results[i].value);
    } else {
      choices.push_back({RepresentativeChoice::Kind::kFallback, fallback_representative(clusters[i], kept_concepts), {}});
    }
  }
  return apply_representatives(std::move(clusters), kept_concepts, choices);
}

std::vector<std::string> map_to_representatives(const std::vector<std::string>& raw_ids,
                                                const std::map<std::string, std::string>& representative_of) {
  std::vector<std::string> out;
  for (const auto& id : raw_ids) {
    const auto it = representative_of.find(id);
    if (it == representative_of.end()) continue;
    if (std::find(out.begin(), out.end(), it->second) != out.end()) continue;
    out.push_back(it->second);
    if (out.size() == kMaxConceptsPerSeed) break;
  }
  return out;
}

std::map<std::string, std::string> representative_index(const KnowledgeBase& kb) {
  std::map<std::string, std::string> out;
  for (const auto& cluster : kb.clusters) {
    for (const auto& id : cluster.member_ids) out[id] = cluster.representative_id;
    out[cluster.representative_id] = cluster.representative_id;
  }
  return out;
}

void to_json(json& j, const SimilarityVerdict& v) {
  j = json{{"first", v.first},
           {"second", v.second},
           {"cosine", v.cosine},
           {"band", to_string(v.band)},
           {"judge_confirmed", v.judge_confirmed ? json(*v.judge_confirmed) : json(nullptr)}};
}

void from_json(const json& j, SimilarityVerdict& v) {
  v.first = j.at("first").get<std::string>();
  v.second = j.at("second").get<std::string>();
  v.cosine = j.at("cosine").get<double>();
  v.band = parse_similarity_band(j.at("band").get<std::string>());
  v.judge_confirmed = j.contains("judge_confirmed") && !j["judge_confirmed"].is_null()
                          ? std::optional(j["judge_confirmed"].get<bool>())
                          : std::nullopt;
}

void to_json(json& j, const ConceptCluster& c) {
  j = json{{"cluster_id", c.cluster_id}, {"member_ids", c.member_ids}, {"representative_id", c.representative_id}};
}

void from_json(const json& j, ConceptCluster& c) {
  c.cluster_id = j.at("cluster_id").get<std::string>();
  c.member_ids = j.at("member_ids").get<std::set<std::string>>();
  c.representative_id = j.value("representative_id", std::string{});
}

void to_json(json& j, const RepresentativeChoice& c) {
  const char* kind = c.kind == RepresentativeChoice::Kind::kMember      ? "member"
                     : c.kind == RepresentativeChoice::Kind::kSynthetic ? "synthetic"
                                                                        : "fallback";
  j = json{{"kind", kind}, {"member_id", c.member_id}, {"synthetic_text", c.synthetic_text}};
}

void from_json(const json& j, RepresentativeChoice& c) {
  const auto kind = j.at("kind").get<std::string>();
  c.kind = kind == "member"      ? RepresentativeChoice::Kind::kMember
           : kind == "synthetic" ? RepresentativeChoice::Kind::kSynthetic
                                 : RepresentativeChoice::Kind::kFallback;
  c.member_id = j.value("member_id", std::string{});
  c.synthetic_text = j.value("synthetic_text", std::string{});
}

}  // namespace csynth
