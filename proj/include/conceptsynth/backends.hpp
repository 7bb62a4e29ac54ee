#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "conceptsynth/concurrency.hpp"
#include "conceptsynth/error.hpp"
#include "json.hpp"

namespace csynth {

enum class Role { kExtractor, kGenerator, kRater, kSolverSmall, kSolverLarge, kJudge, kEmbedder };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

inline constexpr std::string_view kMockEndpoint = "mock";

struct RequestParams {
  double temperature = 0.0;
  int max_output_tokens = 2048;
  int max_attempts = 4;
  double backoff_base_seconds = 0.5;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;  // +-20%
  double timeout_seconds = 120.0;
  int max_in_flight = 8;
};

struct BackendDescriptor {
  std::string backend_id;
  Role role = Role::kGenerator;
  std::string endpoint{kMockEndpoint};
  std::string model_name;
  std::optional<double> judge_weight;
  RequestParams params;
  // Environment variable holding the bearer token; empty means no auth header.
  std::string api_key_env;
  // Mock-only behaviour knobs (see MockOptions).
  nlohmann::json mock = nlohmann::json::object();

  bool is_mock() const { return endpoint == kMockEndpoint; }
  // Throws ConfigError on a malformed descriptor.
  void validate() const;
};

void to_json(nlohmann::json& j, const BackendDescriptor& d);
void from_json(const nlohmann::json& j, BackendDescriptor& d);

// Checks that judge weights are finite, nonnegative and not all zero.
void validate_judge_weights(const std::vector<BackendDescriptor>& judges);

// The prompt-driven step a request belongs to. Live endpoints ignore it; the mock uses it to pick
// a response template.
enum class Task {
  kExtractConcepts,
  kReviewConcept,
  kConfirmSynonym,
  kChooseRepresentative,
  kGenerateProblem,
  kRateDifficulty,
  kSolve,
  kScoreProblem,
  kVoteSolution,
};

std::string_view to_string(Task t);
Task parse_task(std::string_view s);

struct DecodeParams {
  Task task = Task::kGenerateProblem;
  std::optional<double> temperature;
  std::optional<int> max_output_tokens;
};

inline DecodeParams for_task(Task t) { return DecodeParams{t, std::nullopt, std::nullopt}; }

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t calls = 0;

  TokenUsage& operator+=(const TokenUsage& o) {
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    calls += o.calls;
    return *this;
  }
  bool operator==(const TokenUsage&) const = default;
};

void to_json(nlohmann::json& j, const TokenUsage& u);
void from_json(const nlohmann::json& j, TokenUsage& u);

struct CompletionExchange {
  std::string prompt;
  std::string output;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::chrono::milliseconds latency{0};

  TokenUsage usage() const { return {input_tokens, output_tokens, 1}; }
};

struct EmbeddingBatch {
  std::vector<std::vector<float>> vectors;  // unit length
  TokenUsage usage;
};

// Thread-safe client for one configured backend. Requests beyond the descriptor's
// max_in_flight block until a slot frees up.
class Backend {
 public:
  explicit Backend(BackendDescriptor descriptor);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  const BackendDescriptor& descriptor() const { return descriptor_; }

  CompletionExchange complete(const std::string& prompt, const DecodeParams& params);
  EmbeddingBatch embed(const std::vector<std::string>& texts);

 protected:
  virtual CompletionExchange do_complete(const std::string& prompt, const DecodeParams& params) = 0;
  virtual EmbeddingBatch do_embed(const std::vector<std::string>& texts) = 0;

 private:
  BackendDescriptor descriptor_;
  Semaphore in_flight_;
};

using BackendPtr = std::shared_ptr<Backend>;

// "mock" endpoints get the in-process mock, everything else the HTTP client.
BackendPtr make_backend(const BackendDescriptor& descriptor);

// Scales each vector to unit L2 norm. Zero vectors raise ProtocolError.
void normalize_in_place(std::vector<float>& v);
double cosine(const std::vector<float>& a, const std::vector<float>& b);

// Whitespace token count; the mock's stand-in for a tokenizer.
std::int64_t count_tokens(std::string_view text);

// Exponential backoff with jitter. Calls `attempt` until it returns, retrying on
// TransientFailure up to params.max_attempts, then throws TransportError.
class TransientFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

// Delay before retry number `retry` (1-based), before jitter.
double backoff_delay_seconds(const RequestParams& params, int retry);

// Uniform factor in [1 - jitter, 1 + jitter].
double jitter_factor(double jitter);

template <typename T>
T with_retries(const RequestParams& params, const std::string& what, const std::function<T()>& attempt,
               const Sleeper& sleep = {}) {
  const int attempts = std::max(1, params.max_attempts);
  std::string last_error;
  for (int i = 1; i <= attempts; ++i) {
    try {
      return attempt();
    } catch (const TransientFailure& e) {
      last_error = e.what();
    }
    if (i == attempts) break;
    const double delay = backoff_delay_seconds(params, i) * jitter_factor(params.backoff_jitter);
    if (sleep) {
      sleep(std::chrono::duration<double>(delay));
    } else {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
  throw TransportError(what + ": " + last_error, attempts);
}

}  // namespace csynth
