#include "conceptsynth/config.hpp"

#include <cmath>
#include <fstream>

#include "conceptsynth/error.hpp"
#include "conceptsynth/hashing.hpp"
#include "conceptsynth/store.hpp"

namespace csynth {
namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& where, const std::set<std::string>& allowed) {
  if (!section.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : section.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown config key " + where + "." + key);
  }
}

template <typename T>
T get_or(const json& section, const char* key, T fallback, const std::string& where) {
  if (!section.contains(key) || section[key].is_null()) return fallback;
  try {
    return section[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + where + "." + key + " has the wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& section, const char* key, const std::string& where) {
  if (!section.contains(key) || section[key].is_null()) return std::nullopt;
  return get_or<T>(section, key, T{}, where);
}

const json& section_of(const json& doc, const char* name) {
  static const json empty = json::object();
  return doc.contains(name) ? doc[name] : empty;
}

void check_unit(double v, const std::string& name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw ConfigError(name + " must lie in [0, 1]");
}

CostModel parse_cost_model(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"mode", "input_price_per_million", "output_price_per_million", "gpu_rate_per_hour", "gpu_count",
                  "hours", "sample_count"});
  CostModel m;
  const auto mode = get_or<std::string>(j, "mode", "token", where);
  if (mode == "token") {
    m.mode = CostModel::Mode::kTokenPriced;
  } else if (mode == "gpu") {
    m.mode = CostModel::Mode::kGpuHourly;
  } else {
    throw ConfigError(where + ".mode must be \"token\" or \"gpu\"");
  }
  m.input_price_per_million = get_or<double>(j, "input_price_per_million", 0.0, where);
  m.output_price_per_million = get_or<double>(j, "output_price_per_million", 0.0, where);
  m.gpu_rate_per_hour = get_or<double>(j, "gpu_rate_per_hour", 0.0, where);
  m.gpu_count = get_or<double>(j, "gpu_count", 0.0, where);
  m.hours = get_or<double>(j, "hours", 0.0, where);
  // 0 means "the run's synthesized item count".
  m.sample_count = get_or<std::int64_t>(j, "sample_count", 0, where);
  return m;
}

json cost_model_json(const CostModel& m) {
  return json{{"mode", m.mode == CostModel::Mode::kGpuHourly ? "gpu" : "token"},
              {"input_price_per_million", m.input_price_per_million},
              {"output_price_per_million", m.output_price_per_million},
              {"gpu_rate_per_hour", m.gpu_rate_per_hour},
              {"gpu_count", m.gpu_count},
              {"hours", m.hours},
              {"sample_count", m.sample_count}};
}

json optional_path(const std::optional<std::filesystem::path>& p) { return p ? json(p->string()) : json(nullptr); }

}  // namespace

RunConfig parse_config(const json& doc) {
  reject_unknown(doc, "config", {"paths", "random_seed", "backends", "extraction", "graph", "evaluation", "analysis", "runtime"});
  RunConfig c;

  const auto& paths = section_of(doc, "paths");
  reject_unknown(paths, "paths", {"seed_corpus", "run_dir", "templates_dir", "reference_corpus", "gold_labels"});
  c.paths.seed_corpus = get_or<std::string>(paths, "seed_corpus", "", "paths");
  c.paths.run_dir = get_or<std::string>(paths, "run_dir", "", "paths");
  if (auto v = get_opt<std::string>(paths, "templates_dir", "paths")) c.paths.templates_dir = *v;
  if (auto v = get_opt<std::string>(paths, "reference_corpus", "paths")) c.paths.reference_corpus = *v;
  if (auto v = get_opt<std::string>(paths, "gold_labels", "paths")) c.paths.gold_labels = *v;

  c.random_seed = get_or<std::uint64_t>(doc, "random_seed", 0, "config");

  if (doc.contains("backends")) {
    if (!doc["backends"].is_array()) throw ConfigError("backends must be a list");
    for (const auto& b : doc["backends"]) c.backends.push_back(b.get<BackendDescriptor>());
  }

  const auto& ex = section_of(doc, "extraction");
  reject_unknown(ex, "extraction", {"same_threshold", "check_threshold", "max_concepts", "reviewer"});
  c.extraction.thresholds.same = get_or<double>(ex, "same_threshold", c.extraction.thresholds.same, "extraction");
  c.extraction.thresholds.check = get_or<double>(ex, "check_threshold", c.extraction.thresholds.check, "extraction");
  c.extraction.max_concepts = get_or<std::size_t>(ex, "max_concepts", c.extraction.max_concepts, "extraction");
  c.extraction.reviewer = get_opt<std::string>(ex, "reviewer", "extraction");

  const auto& g = section_of(doc, "graph");
  reject_unknown(g, "graph",
                 {"hub_fraction", "three_hop_min_weight", "max_distance", "community_sizes", "community_cap", "budget",
                  "kind_budgets"});
  c.graph.hub_fraction = get_or<double>(g, "hub_fraction", c.graph.hub_fraction, "graph");
  c.graph.three_hop_min_weight = get_or<int>(g, "three_hop_min_weight", c.graph.three_hop_min_weight, "graph");
  c.graph.max_distance = get_or<int>(g, "max_distance", c.graph.max_distance, "graph");
  c.graph.community_sizes = get_or<std::set<int>>(g, "community_sizes", c.graph.community_sizes, "graph");
  c.graph.community_cap = get_opt<std::size_t>(g, "community_cap", "graph");
  c.graph.budget = get_opt<std::size_t>(g, "budget", "graph");
  c.graph.kind_budgets = get_or<std::map<std::string, std::size_t>>(g, "kind_budgets", {}, "graph");

  const auto& ev = section_of(doc, "evaluation");
  reject_unknown(ev, "evaluation", {"problem_threshold"});
  c.evaluation.problem_threshold = get_or<double>(ev, "problem_threshold", c.evaluation.problem_threshold, "evaluation");

  const auto& an = section_of(doc, "analysis");
  reject_unknown(an, "analysis", {"ngram_sizes", "top_k", "adherence", "adherence_tolerance", "cost_models"});
  c.analysis.ngram_sizes = get_or<std::vector<int>>(an, "ngram_sizes", c.analysis.ngram_sizes, "analysis");
  c.analysis.top_k = get_or<std::size_t>(an, "top_k", c.analysis.top_k, "analysis");
  c.analysis.adherence = get_or<bool>(an, "adherence", c.analysis.adherence, "analysis");
  c.analysis.adherence_tolerance = get_opt<double>(an, "adherence_tolerance", "analysis");
  if (an.contains("cost_models")) {
    const auto& models = an["cost_models"];
    if (!models.is_object()) throw ConfigError("analysis.cost_models must be an object");
    for (const auto& [name, m] : models.items()) {
      c.analysis.cost_models[name] = parse_cost_model(m, "analysis.cost_models." + name);
    }
  }

  const auto& rt = section_of(doc, "runtime");
  reject_unknown(rt, "runtime", {"max_in_flight", "checkpoint_every", "interrupt_after"});
  c.runtime.max_in_flight = get_or<std::size_t>(rt, "max_in_flight", c.runtime.max_in_flight, "runtime");
  c.runtime.checkpoint_every = get_or<std::size_t>(rt, "checkpoint_every", c.runtime.checkpoint_every, "runtime");
  c.runtime.interrupt_after = get_opt<std::size_t>(rt, "interrupt_after", "runtime");

  c.validate();
  return c;
}

json config_to_json(const RunConfig& c) {
  json models = json::object();
  for (const auto& [name, m] : c.analysis.cost_models) models[name] = cost_model_json(m);
  return json{
      {"paths",
       {{"seed_corpus", c.paths.seed_corpus.string()},
        {"run_dir", c.paths.run_dir.string()},
        {"templates_dir", optional_path(c.paths.templates_dir)},
        {"reference_corpus", optional_path(c.paths.reference_corpus)},
        {"gold_labels", optional_path(c.paths.gold_labels)}}},
      {"random_seed", c.random_seed},
      {"backends", c.backends},
      {"extraction",
       {{"same_threshold", c.extraction.thresholds.same},
        {"check_threshold", c.extraction.thresholds.check},
        {"max_concepts", c.extraction.max_concepts},
        {"reviewer", c.extraction.reviewer ? json(*c.extraction.reviewer) : json(nullptr)}}},
      {"graph",
       {{"hub_fraction", c.graph.hub_fraction},
        {"three_hop_min_weight", c.graph.three_hop_min_weight},
        {"max_distance", c.graph.max_distance},
        {"community_sizes", c.graph.community_sizes},
        {"community_cap", c.graph.community_cap ? json(*c.graph.community_cap) : json(nullptr)},
        {"budget", c.graph.budget ? json(*c.graph.budget) : json(nullptr)},
        {"kind_budgets", c.graph.kind_budgets}}},
      {"evaluation", {{"problem_threshold", c.evaluation.problem_threshold}}},
      {"analysis",
       {{"ngram_sizes", c.analysis.ngram_sizes},
        {"top_k", c.analysis.top_k},
        {"adherence", c.analysis.adherence},
        {"adherence_tolerance", c.analysis.adherence_tolerance ? json(*c.analysis.adherence_tolerance) : json(nullptr)},
        {"cost_models", models}}},
      {"runtime",
       {{"max_in_flight", c.runtime.max_in_flight},
        {"checkpoint_every", c.runtime.checkpoint_every},
        {"interrupt_after", c.runtime.interrupt_after ? json(*c.runtime.interrupt_after) : json(nullptr)}}},
  };
}

void RunConfig::validate() const {
  if (paths.seed_corpus.empty()) throw ConfigError("paths.seed_corpus is required");
  if (paths.run_dir.empty()) throw ConfigError("paths.run_dir is required");

  check_unit(extraction.thresholds.same, "extraction.same_threshold");
  check_unit(extraction.thresholds.check, "extraction.check_threshold");
  if (extraction.thresholds.check > extraction.thresholds.same) {
    throw ConfigError("extraction.check_threshold must not exceed extraction.same_threshold");
  }
  if (extraction.max_concepts < 1) throw ConfigError("extraction.max_concepts must be >= 1");

  if (!(graph.hub_fraction > 0.0) || graph.hub_fraction > 1.0) throw ConfigError("graph.hub_fraction must lie in (0, 1]");
  if (graph.three_hop_min_weight < 0) throw ConfigError("graph.three_hop_min_weight must be >= 0");
  if (graph.max_distance < 1) throw ConfigError("graph.max_distance must be >= 1");
  for (int s : graph.community_sizes) {
    if (s < 3 || s > 4) throw ConfigError("graph.community_sizes entries must be 3 or 4");
  }
  for (const auto& [kind, _] : graph.kind_budgets) parse_combination_kind(kind);

  check_unit(evaluation.problem_threshold, "evaluation.problem_threshold");

  if (analysis.ngram_sizes.empty()) throw ConfigError("analysis.ngram_sizes must not be empty");
  for (int n : analysis.ngram_sizes) {
    if (n < 1) throw ConfigError("analysis.ngram_sizes entries must be >= 1");
  }
  if (analysis.adherence_tolerance) check_unit(*analysis.adherence_tolerance, "analysis.adherence_tolerance");
  for (const auto& [name, m] : analysis.cost_models) {
    CostModel probe = m;
    if (probe.sample_count == 0) probe.sample_count = 1;
    try {
      probe.validate();
    } catch (const ValidationError& e) {
      throw ConfigError("analysis.cost_models." + name + ": " + e.what());
    }
  }

  if (runtime.max_in_flight < 1) throw ConfigError("runtime.max_in_flight must be >= 1");
  if (runtime.checkpoint_every < 1) throw ConfigError("runtime.checkpoint_every must be >= 1");

  std::set<std::string> ids;
  for (const auto& b : backends) {
    b.validate();
    if (!ids.insert(b.backend_id).second) throw ConfigError("duplicate backend_id \"" + b.backend_id + "\"");
  }
  for (Role r : {Role::kExtractor, Role::kGenerator, Role::kRater, Role::kSolverSmall, Role::kSolverLarge, Role::kEmbedder}) {
    if (with_role(r).size() > 1) throw ConfigError("more than one backend configured for role " + std::string(to_string(r)));
  }
  const auto judges = with_role(Role::kJudge);
  if (!judges.empty()) validate_judge_weights(judges);
  if (extraction.reviewer) {
    const bool found = std::any_of(backends.begin(), backends.end(), [&](const BackendDescriptor& b) {
      return b.backend_id == *extraction.reviewer && b.role != Role::kEmbedder;
    });
    if (!found) throw ConfigError("extraction.reviewer names no configured completion backend: " + *extraction.reviewer);
  }
}

std::vector<BackendDescriptor> RunConfig::with_role(Role role) const {
  std::vector<BackendDescriptor> out;
  for (const auto& b : backends) {
    if (b.role == role) out.push_back(b);
  }
  return out;
}

void RunConfig::require_roles(const std::vector<Role>& roles, const std::string& stage) const {
  std::string missing;
  for (Role r : roles) {
    if (with_role(r).empty()) {
      if (!missing.empty()) missing += ", ";
      missing += to_string(r);
    }
  }
  if (!missing.empty()) throw ConfigError(stage + ": no backend configured for role(s) " + missing);
}

json load_config_document(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
  const auto base = path.parent_path();
  if (doc.contains("paths") && doc["paths"].is_object()) {
    for (auto& [key, value] : doc["paths"].items()) {
      if (value.is_string() && std::filesystem::path(value.get<std::string>()).is_relative()) {
        value = (base / value.get<std::string>()).lexically_normal().string();
      }
    }
  }
  return doc;
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
  if (dotted_key.empty()) throw ConfigError("empty override key");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted_key.find('.', start);
    const std::string part = dotted_key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed override key \"" + dotted_key + "\"");
    if (!node->is_object()) throw ConfigError("override key \"" + dotted_key + "\" descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = parsed;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

std::string config_fingerprint(const RunConfig& config) {
  json j = config_to_json(config);
  j.erase("runtime");
  j["paths"].erase("run_dir");
  return sha256_hex(j.dump());
}

}  // namespace csynth
