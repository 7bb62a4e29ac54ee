#include "conceptsynth/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <csignal>
#include <cstdint>
#include <set>

#include <spdlog/spdlog.h>

#include "conceptsynth/analytics.hpp"
#include "conceptsynth/concurrency.hpp"
#include "conceptsynth/error.hpp"
#include "conceptsynth/evaluation.hpp"
#include "conceptsynth/extraction.hpp"
#include "conceptsynth/graph.hpp"
#include "conceptsynth/hashing.hpp"
#include "conceptsynth/store.hpp"
#include "conceptsynth/synthesis.hpp"

namespace csynth {
namespace {

using nlohmann::json;

std::atomic<bool> g_interrupt{false};

extern "C" void on_signal(int) { g_interrupt.store(true); }

const std::vector<std::string> kStages{"extract", "graph", "synthesize", "analyze"};

const std::map<std::string, std::vector<std::string>>& steps_by_stage() {
  static const std::map<std::string, std::vector<std::string>> steps{
      {"extract", {"extract", "review", "similarity", "synonym", "representative"}},
      {"graph", {"graph"}},
      {"synthesize", {"generate", "evaluate"}},
      {"analyze", {"analysis_similarity", "adherence"}},
  };
  return steps;
}

fs::path state_dir(const fs::path& run_dir) { return run_dir / "state"; }

void write_json_file(const fs::path& path, const json& doc) { atomic_write_file(path, doc.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void require_file(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) throw ValidationError(path.string() + " not found; run `" + producer + "` first");
}

TokenUsage usage_of(const json& record) {
  return record.contains("usage") ? record["usage"].get<TokenUsage>() : TokenUsage{};
}

TokenUsage total_usage(const std::map<std::string, json>& records) {
  TokenUsage u;
  for (const auto& [_, r] : records) u += usage_of(r);
  return u;
}

// A dead endpoint shows up as every item failing at the transport layer; report it as a backend error
// instead of carrying on with an empty stage.
void fail_if_all_backend_errors(const std::map<std::string, json>& records, const std::string& step) {
  if (records.empty()) return;
  for (const auto& [_, r] : records) {
    if (!r.value("backend_error", false)) return;
  }
  throw BackendError(step + ": every request failed; first error: " + records.begin()->second.value("error", ""));
}

json counters_json(const StageCounters& c) {
  return json{{"input", c.input}, {"accepted", c.accepted}, {"rejected", c.rejected}, {"failed", c.failed}, {"dropped", c.dropped}};
}

StageCounters counters_from(const json& j) {
  StageCounters c;
  c.input = j.value("input", std::int64_t{0});
  c.accepted = j.value("accepted", std::int64_t{0});
  c.rejected = j.value("rejected", std::int64_t{0});
  c.failed = j.value("failed", std::int64_t{0});
  c.dropped = j.value("dropped", std::int64_t{0});
  return c;
}

std::string prompt_digest(const PromptLibrary& prompts) {
  std::vector<std::string_view> names{prompt_names::kExtractConcepts, prompt_names::kReviewConcept,
                                      prompt_names::kConfirmSynonym,  prompt_names::kChooseRepresentative,
                                      prompt_names::kRateDifficulty,  prompt_names::kSolve,
                                      prompt_names::kScoreProblem,    prompt_names::kVoteSolution};
  std::string all;
  for (auto n : names) all += std::string(n) + "\n" + prompts.get(n).body + "\n";
  for (std::size_t arity = 2; arity <= 4; ++arity) {
    const auto name = problem_template_name(arity);
    if (prompts.has(name)) all += name + "\n" + prompts.get(name).body + "\n";
  }
  return sha256_hex(all);
}

std::map<std::string, std::string> text_index(const std::vector<KeyConcept>& concepts) {
  std::map<std::string, std::string> out;
  for (const auto& c : concepts) out[c.id] = c.text;
  return out;
}

std::vector<SeedConceptSet> seed_sets_of(const std::vector<SeedExample>& seeds) {
  std::vector<SeedConceptSet> out;
  for (const auto& s : seeds) out.push_back({s.id, s.concept_ids});
  return out;
}

std::string item_id_for(const std::string& combination_id) { return content_id("item-", combination_id); }

}  // namespace

void install_interrupt_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}
void request_interrupt() { g_interrupt.store(true); }
bool interrupt_requested() { return g_interrupt.load(); }
void clear_interrupt() { g_interrupt.store(false); }

const std::vector<std::string>& all_output_files() {
  static const std::vector<std::string> files{
      outputs::kSeeds,        outputs::kConceptsRaw,   outputs::kConceptsFiltered, outputs::kSimilarPairs,
      outputs::kClusters,     outputs::kKnowledgeBase, outputs::kExtractSummary,   outputs::kGraphEdges,
      outputs::kCombinations, outputs::kGraphSummary,  outputs::kItems,            outputs::kSynthesizeSummary,
      outputs::kReport,       outputs::kHistogram,
  };
  return files;
}

Pipeline::Pipeline(RunConfig config)
    : config_(std::move(config)),
      prompts_(config_.paths.templates_dir ? PromptLibrary::load(*config_.paths.templates_dir) : PromptLibrary::defaults()) {
  config_.validate();
  prompts_.validate();
  fs::create_directories(state_dir(config_.paths.run_dir));
}

void Pipeline::reset_state(const std::vector<std::string>& stages) {
  for (const auto& stage : stages) {
    const auto it = steps_by_stage().find(stage);
    if (it == steps_by_stage().end()) throw ValidationError("unknown stage " + stage);
    for (const auto& step : it->second) {
      fs::remove(state_dir(run_dir()) / (step + ".checkpoint.json"));
      fs::remove(state_dir(run_dir()) / (step + ".journal.jsonl"));
    }
  }
}

std::string Pipeline::stage_fingerprint(const std::string& stage) const {
  const json c = config_to_json(config_);
  std::string fp = sha256_hex("extract\n" + sha256_hex(read_file(config_.paths.seed_corpus)) + "\n" +
                              json{{"backends", c["backends"]},
                                   {"extraction", c["extraction"]},
                                   {"random_seed", c["random_seed"]},
                                   {"templates", prompt_digest(prompts_)}}
                                  .dump());
  if (stage == "extract") return fp;
  fp = sha256_hex(fp + "\ngraph\n" + c["graph"].dump());
  if (stage == "graph") return fp;
  fp = sha256_hex(fp + "\nsynthesize\n" + c["evaluation"].dump());
  if (stage == "synthesize") return fp;
  fp = sha256_hex(fp + "\nanalyze\n" + c["analysis"].dump() + c["paths"]["reference_corpus"].dump() +
                  c["paths"]["gold_labels"].dump());
  if (stage == "analyze") return fp;
  throw ValidationError("unknown stage " + stage);
}

void Pipeline::check_interrupt() {
  if (interrupt_requested()) throw Interrupted("interrupted; progress is checkpointed, rerun the same command to resume");
  if (config_.runtime.interrupt_after && processed_ >= *config_.runtime.interrupt_after) {
    throw Interrupted("stopped after " + std::to_string(processed_) +
                      " items (runtime.interrupt_after); rerun the same command to resume");
  }
}

std::map<std::string, json> Pipeline::run_itemized(const std::string& step, const std::string& fingerprint,
                                                   const std::vector<std::string>& ids, const Work& work) {
  const fs::path ckpt_path = state_dir(run_dir()) / (step + ".checkpoint.json");
  const Journal journal(state_dir(run_dir()) / (step + ".journal.jsonl"));

  StageCheckpoint ckpt{step, {}, fingerprint};
  if (auto existing = read_checkpoint(ckpt_path)) {
    require_resumable(*existing, fingerprint);
    ckpt = std::move(*existing);
  }

  // The checkpoint is authoritative: journal lines past it belong to a chunk that never committed.
  std::map<std::string, json> done;
  for (auto& rec : journal.read_all()) {
    const auto id = rec.at("id").get<std::string>();
    if (ckpt.completed_item_ids.contains(id)) done[id] = std::move(rec);
  }
  for (const auto& id : ckpt.completed_item_ids) {
    if (!done.contains(id)) {
      throw CheckpointError("journal for step " + step + " lacks completed item " + id + "; restart the run with --restart");
    }
  }

  const auto pending = select_resumable_work(ids, ckpt, fingerprint);
  if (!pending.empty()) {
    spdlog::info("{}: {} of {} items pending", step, pending.size(), ids.size());
  }
  write_checkpoint(ckpt, ckpt_path);

  const std::size_t chunk = config_.runtime.checkpoint_every;
  for (std::size_t start = 0; start < pending.size(); start += chunk) {
    check_interrupt();
    const std::size_t end = std::min(pending.size(), start + chunk);
    std::vector<std::function<json()>> requests;
    for (std::size_t i = start; i < end; ++i) {
      requests.emplace_back([&work, &id = pending[i]] { return work(id); });
    }
    const auto results = run_bounded(requests, config_.runtime.max_in_flight);

    std::vector<json> committed;
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i].ok()) {
        if (!first_error) first_error = results[i].error;
        continue;
      }
      json rec = *results[i].value;
      rec["id"] = pending[start + i];
      committed.push_back(rec);
    }
    journal.append(committed);
    for (auto& rec : committed) {
      const auto id = rec["id"].get<std::string>();
      ckpt.completed_item_ids.insert(id);
      done[id] = std::move(rec);
    }
    write_checkpoint(ckpt, ckpt_path);
    if (first_error) std::rethrow_exception(first_error);
    processed_ += end - start;
  }

  std::map<std::string, json> out;
  for (const auto& id : ids) out[id] = done.at(id);
  return out;
}

BackendPtr Pipeline::backend_by_id(const std::string& id) {
  if (auto it = backends_.find(id); it != backends_.end()) return it->second;
  for (auto d : config_.backends) {
    if (d.backend_id != id) continue;
    if (d.is_mock() && !d.mock.contains("seed")) d.mock["seed"] = config_.random_seed;
    auto b = make_backend(d);
    backends_[id] = b;
    return b;
  }
  throw ConfigError("no backend with id " + id);
}

BackendPtr Pipeline::backend(Role role) {
  const auto ds = config_.with_role(role);
  if (ds.empty()) throw ConfigError("no backend configured for role " + std::string(to_string(role)));
  return backend_by_id(ds.front().backend_id);
}

std::vector<BackendPtr> Pipeline::judges() {
  std::vector<BackendPtr> out;
  for (const auto& d : config_.with_role(Role::kJudge)) out.push_back(backend_by_id(d.backend_id));
  return out;
}

BackendPtr Pipeline::reviewer() {
  if (config_.extraction.reviewer) return backend_by_id(*config_.extraction.reviewer);
  return backend(Role::kJudge);
}

void Pipeline::extract() {
  if (config_.extraction.reviewer) {
    config_.require_roles({Role::kExtractor, Role::kEmbedder}, "extract");
  } else {
    config_.require_roles({Role::kExtractor, Role::kEmbedder, Role::kJudge}, "extract");
  }
  auto extractor = backend(Role::kExtractor);
  auto embedder = backend(Role::kEmbedder);
  auto judge = reviewer();

  auto seeds = load_seed_corpus(config_.paths.seed_corpus);
  if (seeds.empty()) throw ValidationError("seed corpus " + config_.paths.seed_corpus.string() + " is empty");
  const std::string fp = stage_fingerprint("extract");
  std::map<std::string, const SeedExample*> seed_by_id;
  std::vector<std::string> seed_ids;
  for (const auto& s : seeds) {
    seed_by_id[s.id] = &s;
    seed_ids.push_back(s.id);
  }

  // Concept extraction, one call per seed.
  const auto extracted = run_itemized("extract", fp, seed_ids, [&](const std::string& id) {
    try {
      auto r = extract_concepts(*seed_by_id.at(id), *extractor, prompts_, config_.extraction.max_concepts);
      return json{{"concepts", r.concepts}, {"warnings", r.warnings}, {"usage", r.usage}};
    } catch (const ExtractionError& e) {
      return json{{"concepts", json::array()}, {"error", e.what()}, {"raw_output", e.raw_output()}};
    } catch (const BackendError& e) {
      return json{{"concepts", json::array()}, {"error", e.what()}, {"backend_error", true}};
    }
  });
  fail_if_all_backend_errors(extracted, "extract");

  StageCounters extraction_counts;
  extraction_counts.input = static_cast<std::int64_t>(seeds.size());
  std::map<std::string, KeyConcept> raw;
  std::map<std::string, std::vector<std::string>> raw_ids_of_seed;
  for (const auto& s : seeds) {
    const auto& rec = extracted.at(s.id);
    if (rec.contains("error")) {
      ++extraction_counts.failed;
      spdlog::warn("seed {}: {}", s.id, rec["error"].get<std::string>());
    } else {
      ++extraction_counts.accepted;
    }
    for (const auto& text : rec["concepts"]) {
      const auto canonical = canonicalize_concept(text.get<std::string>());
      const auto cid = concept_id_for(canonical);
      auto& kc = raw[cid];
      if (kc.id.empty()) {
        kc.id = cid;
        kc.text = canonical;
      }
      if (std::find(kc.provenance.begin(), kc.provenance.end(), s.id) == kc.provenance.end()) kc.provenance.push_back(s.id);
      raw_ids_of_seed[s.id].push_back(cid);
    }
  }
  std::vector<KeyConcept> raw_list;
  std::vector<std::string> raw_ids;
  for (const auto& [id, kc] : raw) {
    raw_list.push_back(kc);
    raw_ids.push_back(id);
  }

  // Quality review, one judge call per distinct concept.
  const auto reviews = run_itemized("review", fp, raw_ids, [&](const std::string& id) {
    TokenUsage usage;
    try {
      const auto v = review_concept(raw.at(id), *judge, prompts_, &usage);
      return json{{"category", to_string(v.category)}, {"kept", v.kept}, {"review_flag", v.review_flag}, {"usage", usage}};
    } catch (const BackendError& e) {
      // Fail open: a concept that could not be reviewed stays, flagged for a human.
      return json{{"category", "ok"}, {"kept", true}, {"review_flag", true}, {"error", e.what()},
                  {"backend_error", true}, {"usage", usage}};
    }
  });
  fail_if_all_backend_errors(reviews, "review");

  StageCounters quality_counts;
  quality_counts.input = static_cast<std::int64_t>(raw.size());
  std::map<std::string, KeyConcept> kept;
  std::vector<json> filtered_records;
  for (const auto& kc : raw_list) {
    const auto& rec = reviews.at(kc.id);
    KeyConcept out = kc;
    if (rec["kept"].get<bool>()) {
      kept[kc.id] = kc;
      ++quality_counts.accepted;
    } else {
      out.status = ConceptStatus::kRejected;
      ++quality_counts.rejected;
    }
    json j = out;
    j["quality"] = rec["category"];
    j["review_flag"] = rec["review_flag"];
    filtered_records.push_back(j);
  }

  // Embedding similarity over the kept concepts, as one step.
  std::vector<KeyConcept> kept_list;
  std::vector<std::string> kept_ids;
  for (const auto& [id, kc] : kept) {
    kept_list.push_back(kc);
    kept_ids.push_back(id);
  }
  const auto similarity = run_itemized("similarity", fp, {"all-pairs"}, [&](const std::string&) {
    TokenUsage usage;
    json pairs = json::array();
    if (kept_list.size() >= 2) {
      for (const auto& v : pairwise_similarity(kept_list, *embedder, config_.extraction.thresholds, &usage)) {
        if (v.band != SimilarityBand::kDistinct) pairs.push_back(v);
      }
    }
    return json{{"pairs", pairs}, {"usage", usage}};
  });
  std::vector<SimilarityVerdict> verdicts;
  for (const auto& p : similarity.at("all-pairs")["pairs"]) verdicts.push_back(p.get<SimilarityVerdict>());

  // Judge confirmation of borderline pairs.
  std::vector<std::string> pair_keys;
  std::map<std::string, std::size_t> verdict_of_key;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (verdicts[i].band != SimilarityBand::kJudgeChecked) continue;
    const auto key = verdicts[i].first + "|" + verdicts[i].second;
    pair_keys.push_back(key);
    verdict_of_key[key] = i;
  }
  const auto synonyms = run_itemized("synonym", fp, pair_keys, [&](const std::string& key) {
    const auto& v = verdicts[verdict_of_key.at(key)];
    TokenUsage usage;
    try {
      const bool same = confirm_synonym(kept.at(v.first).text, kept.at(v.second).text, *judge, prompts_, &usage);
      return json{{"confirmed", same}, {"usage", usage}};
    } catch (const BackendError& e) {
      return json{{"confirmed", false}, {"error", e.what()}, {"backend_error", true}, {"usage", usage}};
    }
  });
  for (const auto& [key, rec] : synonyms) verdicts[verdict_of_key.at(key)].judge_confirmed = rec["confirmed"].get<bool>();

  auto clusters = build_clusters(kept_ids, verdicts);

  // Representative choice for multi-member clusters.
  std::vector<std::string> multi_ids;
  std::map<std::string, const ConceptCluster*> cluster_by_id;
  for (const auto& c : clusters) {
    cluster_by_id[c.cluster_id] = &c;
    if (c.member_ids.size() > 1) multi_ids.push_back(c.cluster_id);
  }
  const auto reps = run_itemized("representative", fp, multi_ids, [&](const std::string& cid) {
    TokenUsage usage;
    try {
      const auto choice = choose_representative(*cluster_by_id.at(cid), kept, *judge, prompts_, &usage);
      return json{{"choice", choice}, {"usage", usage}};
    } catch (const BackendError& e) {
      RepresentativeChoice fallback{RepresentativeChoice::Kind::kFallback, fallback_representative(*cluster_by_id.at(cid), kept), ""};
      return json{{"choice", fallback}, {"error", e.what()}, {"backend_error", true}, {"usage", usage}};
    }
  });
  std::vector<RepresentativeChoice> choices;
  for (const auto& c : clusters) {
    if (c.member_ids.size() > 1) {
      choices.push_back(reps.at(c.cluster_id)["choice"].get<RepresentativeChoice>());
    } else {
      choices.push_back({RepresentativeChoice::Kind::kMember, *c.member_ids.begin(), ""});
    }
  }
  const auto kb = apply_representatives(clusters, kept, choices);
  const auto rep_of = representative_index(kb);
  for (auto& s : seeds) s.concept_ids = map_to_representatives(raw_ids_of_seed[s.id], rep_of);

  StageCounters dedup_counts;
  dedup_counts.input = static_cast<std::int64_t>(kept.size());
  dedup_counts.accepted = static_cast<std::int64_t>(kb.clusters.size());
  dedup_counts.dropped = dedup_counts.input - dedup_counts.accepted;

  write_records(run_dir() / outputs::kSeeds, seeds);
  write_records(run_dir() / outputs::kConceptsRaw, raw_list);
  {
    std::string body;
    for (const auto& r : filtered_records) body += r.dump() + "\n";
    atomic_write_file(run_dir() / outputs::kConceptsFiltered, body);
  }
  write_records(run_dir() / outputs::kSimilarPairs, verdicts);
  write_records(run_dir() / outputs::kClusters, kb.clusters);
  write_records(run_dir() / outputs::kKnowledgeBase, kb.concepts);

  TokenUsage extraction_usage = total_usage(extracted);
  TokenUsage dedup_usage = total_usage(similarity);
  dedup_usage += total_usage(synonyms);
  dedup_usage += total_usage(reps);
  write_json_file(run_dir() / outputs::kExtractSummary,
                  json{{"stages",
                        {{"extraction", counters_json(extraction_counts)},
                         {"quality_filter", counters_json(quality_counts)},
                         {"concept_dedup", counters_json(dedup_counts)}}},
                       {"token_usage",
                        {{"extraction", extraction_usage},
                         {"quality_filter", total_usage(reviews)},
                         {"concept_dedup", dedup_usage}}}});
  spdlog::info("extract: {} seeds, {} raw concepts, {} kept, {} representatives", seeds.size(), raw.size(), kept.size(),
               kb.clusters.size());
}

void Pipeline::graph() {
  require_file(run_dir() / outputs::kKnowledgeBase, "extract");
  require_file(run_dir() / outputs::kSeeds, "extract");
  const auto seeds = read_records<SeedExample>(run_dir() / outputs::kSeeds);
  const auto kb = read_records<KeyConcept>(run_dir() / outputs::kKnowledgeBase);

  const std::string fp = stage_fingerprint("graph");
  const fs::path ckpt_path = state_dir(run_dir()) / "graph.checkpoint.json";
  if (auto existing = read_checkpoint(ckpt_path)) require_resumable(*existing, fp);

  std::set<std::string> known;
  for (const auto& c : kb) {
    if (c.status == ConceptStatus::kRepresentative) known.insert(c.id);
  }
  if (known.empty()) throw ValidationError("knowledge base has no representative concepts");
  const auto seed_sets = seed_sets_of(seeds);
  const auto g = ConceptGraph::build(seed_sets, &known);
  if (g.node_count() == 0) throw ValidationError("no seed carries a concept; the graph is empty");

  const auto hubs = identify_hubs(g, config_.graph.hub_fraction);
  std::map<CombinationKind, std::vector<ConceptCombination>> by_kind;
  by_kind[CombinationKind::kOneHop] = enumerate_one_hop(g);
  if (config_.graph.max_distance >= 2) by_kind[CombinationKind::kTwoHop] = enumerate_two_hop(g);
  if (config_.graph.max_distance >= 3) {
    by_kind[CombinationKind::kThreeHop] = enumerate_three_hop(g, hubs, config_.graph.three_hop_min_weight);
  }
  const auto communities =
      enumerate_communities(g, CommunityOptions{config_.graph.community_sizes, config_.graph.community_cap});
  by_kind[CombinationKind::kCommunity] = communities.communities;
  for (int d = 4; d <= config_.graph.max_distance; ++d) {
    auto far = enumerate_pairs_at_distance(g, d, CombinationKind::kDistant);
    auto& dst = by_kind[CombinationKind::kDistant];
    dst.insert(dst.end(), far.begin(), far.end());
  }

  std::vector<ConceptCombination> sampled;
  json enumerated = json::object(), kept = json::object();
  for (const auto& [kind, combos] : by_kind) {
    const std::string name(to_string(kind));
    std::size_t budget = combos.size();
    if (auto it = config_.graph.kind_budgets.find(name); it != config_.graph.kind_budgets.end()) {
      budget = it->second;
    } else if (config_.graph.budget) {
      budget = *config_.graph.budget;
    }
    const auto picked = sample_combinations(combos, budget, config_.random_seed ^ stable_hash64(name));
    enumerated[name] = combos.size();
    kept[name] = picked.size();
    sampled.insert(sampled.end(), picked.begin(), picked.end());
  }

  json truncated = json::object();
  for (const auto& [size, hit] : communities.truncated) truncated[std::to_string(size)] = hit;
  write_records(run_dir() / outputs::kGraphEdges, g.edges());
  write_records(run_dir() / outputs::kCombinations, sampled);
  write_json_file(run_dir() / outputs::kGraphSummary,
                  json{{"nodes", g.node_count()},
                       {"edges", g.edge_count()},
                       {"hubs", hubs.hub_ids},
                       {"hub_min_degree", hubs.min_degree_achieved},
                       {"enumerated", enumerated},
                       {"sampled", kept},
                       {"community_cap_hit", truncated}});
  write_checkpoint(StageCheckpoint{"graph", {"graph"}, fp}, ckpt_path);
  spdlog::info("graph: {} nodes, {} edges, {} combinations sampled", g.node_count(), g.edge_count(), sampled.size());
}

void Pipeline::synthesize() {
  config_.require_roles({Role::kGenerator, Role::kRater, Role::kSolverSmall, Role::kSolverLarge, Role::kJudge},
                        "synthesize");
  auto generator = backend(Role::kGenerator);
  auto rater = backend(Role::kRater);
  auto solver_small = backend(Role::kSolverSmall);
  auto solver_large = backend(Role::kSolverLarge);
  const JudgePanel panel(judges());

  require_file(run_dir() / outputs::kCombinations, "graph");
  const auto combos = read_records<ConceptCombination>(run_dir() / outputs::kCombinations);
  const auto texts = text_index(read_records<KeyConcept>(run_dir() / outputs::kKnowledgeBase));
  const std::string fp = stage_fingerprint("synthesize");

  std::map<std::string, const ConceptCombination*> combo_by_id;
  std::vector<std::string> combo_ids;
  for (const auto& c : combos) {
    if (combo_by_id.emplace(c.id, &c).second) combo_ids.push_back(c.id);
  }
  auto concept_texts = [&](const ConceptCombination& c) {
    std::vector<std::string> out;
    for (const auto& id : c.concept_ids) {
      const auto it = texts.find(id);
      if (it == texts.end()) throw ValidationError("combination " + c.id + " names unknown concept " + id);
      out.push_back(it->second);
    }
    return out;
  };

  const auto generated = run_itemized("generate", fp, combo_ids, [&](const std::string& id) {
    const auto r = generate_problem(concept_texts(*combo_by_id.at(id)), *generator, prompts_);
    json rec{{"question", r.text ? json(*r.text) : json(nullptr)}, {"usage", r.usage}};
    if (!r.text) rec["failure"] = r.failure;
    return rec;
  });
  if (!generated.empty() &&
      std::all_of(generated.begin(), generated.end(), [](const auto& kv) { return kv.second["question"].is_null(); })) {
    throw BackendError("generate: every generation failed; first failure: " +
                       generated.begin()->second.value("failure", std::string{}));
  }

  // Exact-duplicate removal in sorted combination order, so the survivor of a duplicate group is fixed.
  QuestionDeduper dedup;
  std::map<std::string, SynthesizedItem> items;
  std::vector<std::string> to_evaluate;
  StageCounters generation_counts;
  generation_counts.input = static_cast<std::int64_t>(combo_ids.size());
  for (const auto& [cid, rec] : generated) {
    const auto& combo = *combo_by_id.at(cid);
    SynthesizedItem item;
    item.id = item_id_for(cid);
    item.combination_id = cid;
    item.kind = combo.kind;
    item.concept_ids = combo.concept_ids;
    item.concept_texts = concept_texts(combo);
    if (rec["question"].is_null()) {
      item.status = ItemStatus::kGenerationFailed;
      item.review_flags.push_back("generation failed: " + rec.value("failure", std::string{}));
      ++generation_counts.failed;
      items[item.id] = std::move(item);
      continue;
    }
    item.question = rec["question"].get<std::string>();
    if (!dedup.admit(item.question)) continue;
    ++generation_counts.accepted;
    to_evaluate.push_back(item.id);
    items[item.id] = std::move(item);
  }
  generation_counts.dropped = static_cast<std::int64_t>(dedup.dropped());
  std::sort(to_evaluate.begin(), to_evaluate.end());

  const double threshold = config_.evaluation.problem_threshold;
  const std::size_t fanout = config_.runtime.max_in_flight;
  const auto evaluated = run_itemized("evaluate", fp, to_evaluate, [&](const std::string& item_id) {
    const auto& item = items.at(item_id);
    TokenUsage usage;
    json rec;
    json flags = json::array();

    const auto scores = score_problem(item.question, item.concept_texts, item.kind, panel, prompts_, fanout);
    usage += scores.usage;
    for (const auto& f : scores.review_flags) flags.push_back(f);
    const auto verdict = weighted_problem_verdict(scores.scores, panel, threshold);
    rec["problem_scores"] = scores.scores;
    rec["weighted_score"] = verdict.weighted_score;
    auto finish = [&](ItemStatus status) {
      rec["status"] = to_string(status);
      rec["review_flags"] = flags;
      rec["usage"] = usage;
      return rec;
    };
    if (!verdict.accepted) return finish(ItemStatus::kProblemRejected);

    DifficultyRating rating;
    try {
      rating = rate_difficulty(item.question, *rater, prompts_, &usage);
    } catch (const BackendError& e) {
      flags.push_back(std::string("difficulty rating failed: ") + e.what());
      return finish(ItemStatus::kSolutionFailed);
    }
    if (rating.review_flag) flags.push_back("difficulty unparseable, defaulted to high");
    rec["difficulty"] = to_string(rating.level);

    const auto solver = select_solver(rating.level, solver_small, solver_large);
    const auto solution = generate_solution(item.question, *solver, prompts_);
    usage += solution.usage;
    if (!solution.text) {
      flags.push_back("solution failed: " + solution.failure);
      return finish(ItemStatus::kSolutionFailed);
    }
    rec["solution"] = *solution.text;

    const auto votes = vote_solution(item.question, *solution.text, panel, prompts_, fanout);
    usage += votes.usage;
    for (const auto& f : votes.review_flags) flags.push_back(f);
    rec["solution_votes"] = votes.votes;
    return finish(veto_decision(votes.votes) ? ItemStatus::kSolutionAccepted : ItemStatus::kSolutionRejected);
  });

  StageCounters problem_counts, solution_counts;
  problem_counts.input = static_cast<std::int64_t>(to_evaluate.size());
  for (const auto& [item_id, rec] : evaluated) {
    auto& item = items.at(item_id);
    item.problem_scores = rec["problem_scores"].get<std::map<std::string, double>>();
    item.weighted_score = rec["weighted_score"].get<double>();
    item.status = parse_item_status(rec["status"].get<std::string>());
    if (rec.contains("difficulty")) item.difficulty = parse_difficulty(rec["difficulty"].get<std::string>());
    if (rec.contains("solution")) item.solution = rec["solution"].get<std::string>();
    if (rec.contains("solution_votes")) item.solution_votes = rec["solution_votes"].get<std::map<std::string, int>>();
    for (const auto& f : rec["review_flags"]) item.review_flags.push_back(f.get<std::string>());

    if (item.status == ItemStatus::kProblemRejected) {
      ++problem_counts.rejected;
      continue;
    }
    ++problem_counts.accepted;
    ++solution_counts.input;
    if (item.status == ItemStatus::kSolutionAccepted) ++solution_counts.accepted;
    if (item.status == ItemStatus::kSolutionRejected) ++solution_counts.rejected;
    if (item.status == ItemStatus::kSolutionFailed) ++solution_counts.failed;
  }

  std::vector<SynthesizedItem> out;
  for (auto& [_, item] : items) {
    item.validate();
    out.push_back(std::move(item));
  }
  write_records(run_dir() / outputs::kItems, out);
  write_json_file(run_dir() / outputs::kSynthesizeSummary,
                  json{{"stages",
                        {{"generation", counters_json(generation_counts)},
                         {"problem_evaluation", counters_json(problem_counts)},
                         {"solution_evaluation", counters_json(solution_counts)}}},
                       {"token_usage", {{"generation", total_usage(generated)}, {"evaluation", total_usage(evaluated)}}}});
  spdlog::info("synthesize: {} combinations, {} unique questions, {} accepted items", combo_ids.size(),
               to_evaluate.size(), solution_counts.accepted);
}

void Pipeline::analyze() {
  config_.require_roles({Role::kEmbedder}, "analyze");
  if (config_.analysis.adherence) config_.require_roles({Role::kExtractor}, "analyze");
  require_file(run_dir() / outputs::kItems, "synthesize");
  require_file(run_dir() / outputs::kExtractSummary, "extract");
  require_file(run_dir() / outputs::kGraphSummary, "graph");
  require_file(run_dir() / outputs::kSynthesizeSummary, "synthesize");

  const auto seeds = read_records<SeedExample>(run_dir() / outputs::kSeeds);
  const auto items = read_records<SynthesizedItem>(run_dir() / outputs::kItems);
  for (const auto& item : items) item.validate();
  const json extract_summary = read_json_file(run_dir() / outputs::kExtractSummary);
  const json graph_summary = read_json_file(run_dir() / outputs::kGraphSummary);
  const json synth_summary = read_json_file(run_dir() / outputs::kSynthesizeSummary);
  const std::string fp = stage_fingerprint("analyze");

  std::vector<const SynthesizedItem*> accepted;
  for (const auto& item : items) {
    if (item.status == ItemStatus::kSolutionAccepted) accepted.push_back(&item);
  }

  RunReportInputs in;
  in.seed_count = seeds.size();
  in.synthesized_count = accepted.size();
  for (const json* summary : {&extract_summary, &synth_summary}) {
    for (const auto& [name, c] : (*summary)["stages"].items()) in.stages[name] = counters_from(c);
    for (const auto& [name, u] : (*summary)["token_usage"].items()) in.token_usage[name] = u.get<TokenUsage>();
  }
  for (const auto& [kind, n] : graph_summary["sampled"].items()) in.combination_counts[kind] = n.get<std::int64_t>();

  std::vector<std::vector<std::string>> accepted_sets;
  for (const auto* item : accepted) accepted_sets.push_back(item->concept_ids);
  in.novelty = novelty_rate(accepted_sets, seed_sets_of(seeds));

  // Seed similarity: max cosine of each accepted question against every seed question.
  std::vector<std::string> synth_questions, seed_questions;
  for (const auto* item : accepted) synth_questions.push_back(item->question);
  for (const auto& s : seeds) seed_questions.push_back(s.question);
  auto embedder = backend(Role::kEmbedder);
  const auto sim = run_itemized("analysis_similarity", fp, {"accepted-vs-seeds"}, [&](const std::string&) {
    TokenUsage usage;
    std::vector<double> scores;
    if (!synth_questions.empty()) {
      scores = similarity_distribution(synth_questions, seed_questions, *embedder, &usage).per_item_max_cosine;
    }
    return json{{"scores", scores}, {"usage", usage}};
  });
  in.similarity = summarize_similarity(sim.at("accepted-vs-seeds")["scores"].get<std::vector<double>>());
  in.token_usage["analysis_similarity"] = total_usage(sim);

  if (config_.paths.reference_corpus) {
    std::vector<std::string> synth_texts, ref_texts;
    for (const auto* item : accepted) synth_texts.push_back(item->question + "\n" + item->solution.value_or(""));
    for (const auto& r : load_seed_corpus(*config_.paths.reference_corpus)) ref_texts.push_back(r.question + "\n" + r.solution);
    in.decontamination = ngram_overlap(synth_texts, ref_texts, config_.analysis.ngram_sizes, config_.analysis.top_k);
  }

  if (config_.analysis.adherence) {
    auto extractor = backend(Role::kExtractor);
    std::map<std::string, const SynthesizedItem*> by_id;
    std::vector<std::string> ids;
    for (const auto* item : accepted) {
      by_id[item->id] = item;
      ids.push_back(item->id);
    }
    const auto reextracted = run_itemized("adherence", fp, ids, [&](const std::string& id) {
      const SeedExample probe{id, by_id.at(id)->question, "", {}};
      try {
        const auto r = extract_concepts(probe, *extractor, prompts_, SIZE_MAX);
        return json{{"concepts", r.concepts}, {"usage", r.usage}};
      } catch (const Error& e) {
        return json{{"concepts", nullptr}, {"error", e.what()}};
      }
    });
    std::vector<AdherenceInput> inputs;
    std::vector<std::optional<std::vector<std::string>>> found;
    for (const auto& id : ids) {
      inputs.push_back({id, by_id.at(id)->concept_texts, by_id.at(id)->question});
      const auto& rec = reextracted.at(id);
      if (rec["concepts"].is_null()) {
        found.emplace_back(std::nullopt);
      } else {
        found.emplace_back(rec["concepts"].get<std::vector<std::string>>());
      }
    }
    ConceptMatcher matcher;
    if (config_.analysis.adherence_tolerance) {
      matcher = [embedder, t = *config_.analysis.adherence_tolerance](const std::string& a, const std::string& b) {
        const auto batch = embedder->embed({a, b});
        return cosine(batch.vectors[0], batch.vectors[1]) >= t;
      };
    }
    in.adherence = adherence_from_extractions(inputs, found, matcher);
    in.token_usage["adherence"] = total_usage(reextracted);
  }

  // Per-sample generation cost from the measured token counts of every stage up to evaluation.
  if (!accepted.empty()) {
    TokenUsage spent;
    for (const char* stage : {"extraction", "quality_filter", "concept_dedup", "generation", "evaluation"}) {
      if (auto it = in.token_usage.find(stage); it != in.token_usage.end()) spent += it->second;
    }
    const double n = static_cast<double>(accepted.size());
    const double in_per = static_cast<double>(spent.input_tokens) / n;
    const double out_per = static_cast<double>(spent.output_tokens) / n;
    json models = json::object();
    for (auto [name, model] : config_.analysis.cost_models) {
      if (model.sample_count == 0) model.sample_count = static_cast<std::int64_t>(accepted.size());
      models[name] = cost_report(model, in_per, out_per);
    }
    in.cost = json{{"samples", accepted.size()},
                   {"input_tokens_per_sample", in_per},
                   {"output_tokens_per_sample", out_per},
                   {"per_sample_cost", models}};
  }

  // Mean weighted judge score per combination kind, over every item the panel scored.
  std::map<std::string, KindScore> hop;
  for (const auto& item : items) {
    if (!item.weighted_score) continue;
    auto& k = hop[std::string(to_string(item.kind))];
    k.mean_weighted_score += *item.weighted_score;
    ++k.count;
  }
  for (auto& [_, k] : hop) k.mean_weighted_score /= static_cast<double>(k.count);
  in.hop_quality = hop;

  json report = run_report(in);
  report["graph"] = json{{"nodes", graph_summary["nodes"]}, {"edges", graph_summary["edges"]}, {"hubs", graph_summary["hubs"]}};
  if (config_.paths.gold_labels) {
    std::map<std::string, bool> verdicts;
    for (const auto& item : items) verdicts[item.id] = item.status == ItemStatus::kSolutionAccepted;
    const auto gold = load_gold_labels(*config_.paths.gold_labels);
    report["judge_ensemble"] = json{{"labeled", gold.size()}, {"accuracy", ensemble_accuracy(verdicts, gold)}};
  } else {
    report["judge_ensemble"] = json{{"status", "not computed"}};
  }

  write_json_file(run_dir() / outputs::kReport, report);
  atomic_write_file(run_dir() / outputs::kHistogram, similarity_histogram_csv(*in.similarity));
  spdlog::info("analyze: {} accepted of {} items, expansion ratio {:.3f}", accepted.size(), items.size(),
               static_cast<double>(accepted.size()) / static_cast<double>(std::max<std::size_t>(1, seeds.size())));
}

void Pipeline::run_all() {
  extract();
  graph();
  synthesize();
  analyze();
}

void run_command(const std::string& command, const RunConfig& config, bool restart) {
  const RunLock lock(config.paths.run_dir);
  Pipeline p(config);
  if (command == "run-all") {
    if (restart) p.reset_state(kStages);
    p.run_all();
    return;
  }
  if (std::find(kStages.begin(), kStages.end(), command) == kStages.end()) {
    throw ValidationError("unknown command " + command);
  }
  if (restart) p.reset_state({command});
  if (command == "extract") p.extract();
  if (command == "graph") p.graph();
  if (command == "synthesize") p.synthesize();
  if (command == "analyze") p.analyze();
}

}  // namespace csynth
