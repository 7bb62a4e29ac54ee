#include "conceptsynth/backends.hpp"

#include <array>
#include <cmath>
#include <random>
#include <utility>

#include "conceptsynth/http_backend.hpp"
#include "conceptsynth/mock_backend.hpp"

namespace csynth {
namespace {

using nlohmann::json;

constexpr std::array<std::pair<Role, std::string_view>, 7> kRoles{{
    {Role::kExtractor, "extractor"},
    {Role::kGenerator, "generator"},
    {Role::kRater, "rater"},
    {Role::kSolverSmall, "solver_small"},
    {Role::kSolverLarge, "solver_large"},
    {Role::kJudge, "judge"},
    {Role::kEmbedder, "embedder"},
}};

constexpr std::array<std::pair<Task, std::string_view>, 9> kTasks{{
    {Task::kExtractConcepts, "extract_concepts"},
    {Task::kReviewConcept, "review_concept"},
    {Task::kConfirmSynonym, "confirm_synonym"},
    {Task::kChooseRepresentative, "choose_representative"},
    {Task::kGenerateProblem, "generate_problem"},
    {Task::kRateDifficulty, "rate_difficulty"},
    {Task::kSolve, "solve"},
    {Task::kScoreProblem, "score_problem"},
    {Task::kVoteSolution, "vote_solution"},
}};

}  // namespace

std::string_view to_string(Role r) {
  for (const auto& [v, n] : kRoles) {
    if (v == r) return n;
  }
  return "?";
}

Role parse_role(std::string_view s) {
  for (const auto& [v, n] : kRoles) {
    if (n == s) return v;
  }
  throw ConfigError("unknown backend role \"" + std::string(s) + "\"");
}

std::string_view to_string(Task t) {
  for (const auto& [v, n] : kTasks) {
    if (v == t) return n;
  }
  return "?";
}

Task parse_task(std::string_view s) {
  for (const auto& [v, n] : kTasks) {
    if (n == s) return v;
  }
  throw ConfigError("unknown task \"" + std::string(s) + "\"");
}

void BackendDescriptor::validate() const {
  if (backend_id.empty()) throw ConfigError("backend descriptor without backend_id");
  if (endpoint.empty()) throw ConfigError("backend " + backend_id + ": empty endpoint");
  if (judge_weight.has_value() != (role == Role::kJudge)) {
    throw ConfigError("backend " + backend_id + ": judge_weight must be set iff role is judge");
  }
  if (judge_weight && (!std::isfinite(*judge_weight) || *judge_weight < 0.0)) {
    throw ConfigError("backend " + backend_id + ": judge_weight must be finite and nonnegative");
  }
  if (params.max_attempts < 1) throw ConfigError("backend " + backend_id + ": max_attempts must be >= 1");
  if (params.max_in_flight < 1) throw ConfigError("backend " + backend_id + ": max_in_flight must be >= 1");
  if (params.backoff_base_seconds < 0 || params.backoff_factor < 1.0 || params.backoff_jitter < 0 ||
      params.backoff_jitter >= 1.0) {
    throw ConfigError("backend " + backend_id + ": invalid backoff parameters");
  }
}

void validate_judge_weights(const std::vector<BackendDescriptor>& judges) {
  if (judges.empty()) throw ConfigError("at least one judge backend is required");
  double total = 0.0;
  for (const auto& j : judges) {
    if (!j.judge_weight) throw ConfigError("judge " + j.backend_id + " has no judge_weight");
    if (!std::isfinite(*j.judge_weight) || *j.judge_weight < 0.0) {
      throw ConfigError("judge " + j.backend_id + " has an invalid weight");
    }
    total += *j.judge_weight;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw ConfigError("judge weights are all zero");
}

void to_json(json& j, const BackendDescriptor& d) {
  j = json{{"backend_id", d.backend_id},
           {"role", to_string(d.role)},
           {"endpoint", d.endpoint},
           {"model_name", d.model_name},
           {"judge_weight", d.judge_weight ? json(*d.judge_weight) : json(nullptr)},
           {"api_key_env", d.api_key_env},
           {"params",
            {{"temperature", d.params.temperature},
             {"max_output_tokens", d.params.max_output_tokens},
             {"max_attempts", d.params.max_attempts},
             {"backoff_base_seconds", d.params.backoff_base_seconds},
             {"backoff_factor", d.params.backoff_factor},
             {"backoff_jitter", d.params.backoff_jitter},
             {"timeout_seconds", d.params.timeout_seconds},
             {"max_in_flight", d.params.max_in_flight}}},
           {"mock", d.mock}};
}

void from_json(const json& j, BackendDescriptor& d) {
  if (!j.is_object()) throw ConfigError("backend descriptor must be an object");
  try {
    d.backend_id = j.at("backend_id").get<std::string>();
    d.role = parse_role(j.at("role").get<std::string>());
    d.endpoint = j.value("endpoint", std::string(kMockEndpoint));
    d.model_name = j.value("model_name", d.backend_id);
    d.judge_weight = j.contains("judge_weight") && !j["judge_weight"].is_null()
                         ? std::optional(j["judge_weight"].get<double>())
                         : std::nullopt;
    d.api_key_env = j.value("api_key_env", std::string{});
    if (j.contains("params")) {
      const auto& p = j["params"];
      d.params.temperature = p.value("temperature", d.params.temperature);
      d.params.max_output_tokens = p.value("max_output_tokens", d.params.max_output_tokens);
      d.params.max_attempts = p.value("max_attempts", d.params.max_attempts);
      d.params.backoff_base_seconds = p.value("backoff_base_seconds", d.params.backoff_base_seconds);
      d.params.backoff_factor = p.value("backoff_factor", d.params.backoff_factor);
      d.params.backoff_jitter = p.value("backoff_jitter", d.params.backoff_jitter);
      d.params.timeout_seconds = p.value("timeout_seconds", d.params.timeout_seconds);
      d.params.max_in_flight = p.value("max_in_flight", d.params.max_in_flight);
    }
    d.mock = j.value("mock", json::object());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed backend descriptor: ") + e.what());
  }
  d.validate();
}

void to_json(json& j, const TokenUsage& u) {
  j = json{{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}, {"calls", u.calls}};
}

void from_json(const json& j, TokenUsage& u) {
  u.input_tokens = j.value("input_tokens", std::int64_t{0});
  u.output_tokens = j.value("output_tokens", std::int64_t{0});
  u.calls = j.value("calls", std::int64_t{0});
}

Backend::Backend(BackendDescriptor descriptor)
    : descriptor_(std::move(descriptor)),
      in_flight_(static_cast<std::size_t>(std::max(1, descriptor_.params.max_in_flight))) {}

CompletionExchange Backend::complete(const std::string& prompt, const DecodeParams& params) {
  if (descriptor_.role == Role::kEmbedder) {
    throw ValidationError("backend " + descriptor_.backend_id + " is an embedder and cannot complete prompts");
  }
  in_flight_.acquire();
  struct Release {
    Semaphore& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  const auto start = std::chrono::steady_clock::now();
  CompletionExchange ex = do_complete(prompt, params);
  ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  if (ex.input_tokens < 0 || ex.output_tokens < 0) {
    throw ProtocolError("backend " + descriptor_.backend_id + " reported negative token counts");
  }
  return ex;
}

EmbeddingBatch Backend::embed(const std::vector<std::string>& texts) {
  if (descriptor_.role != Role::kEmbedder) {
    throw ValidationError("backend " + descriptor_.backend_id + " is not an embedder");
  }
  if (texts.empty()) throw ValidationError("embed: input list is empty");
  in_flight_.acquire();
  struct Release {
    Semaphore& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  EmbeddingBatch batch = do_embed(texts);
  if (batch.vectors.size() != texts.size()) {
    throw ProtocolError("backend " + descriptor_.backend_id + " returned " + std::to_string(batch.vectors.size()) +
                        " embeddings for " + std::to_string(texts.size()) + " inputs");
  }
  for (auto& v : batch.vectors) normalize_in_place(v);
  return batch;
}

BackendPtr make_backend(const BackendDescriptor& descriptor) {
  descriptor.validate();
  if (descriptor.is_mock()) return std::make_shared<MockBackend>(descriptor);
  return std::make_shared<HttpBackend>(descriptor);
}

void normalize_in_place(std::vector<float>& v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw ProtocolError("embedding vector has zero or non-finite norm");
  for (float& x : v) x = static_cast<float>(x / norm);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::int64_t count_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

double backoff_delay_seconds(const RequestParams& params, int retry) {
  return params.backoff_base_seconds * std::pow(params.backoff_factor, retry - 1);
}

double jitter_factor(double jitter) {
  if (jitter <= 0.0) return 1.0;
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(1.0 - jitter, 1.0 + jitter);
  return dist(rng);
}

}  // namespace csynth
