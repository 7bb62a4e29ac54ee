#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conceptsynth/backends.hpp"

namespace csynth {

// Behaviour knobs read from a descriptor's "mock" object:
//   seed           hash salt (default 0)
//   fixed          {task: output} canned reply for a whole task
//   rules          [{task?, contains, output?, fail?}] first match wins, checked before `fixed`
//   score_by_kind  {combination kind: score} base judge score keyed on the prompt's relationship line
//   score_range    [lo, hi] range of hashed judge scores (default [0.70, 1.00])
//   yes_rate       probability of a YES solution vote (default 0.9)
//   max_delay_ms   hashed per-request sleep, for interleaving tests (default 0)
//   embedding_dim  mock embedding width (default 256)
struct MockRule {
  std::optional<Task> task;
  std::string contains;
  std::string output;
  bool fail = false;
};

struct MockOptions {
  std::uint64_t seed = 0;
  std::map<Task, std::string> fixed;
  std::vector<MockRule> rules;
  std::map<std::string, double> score_by_kind;
  double score_lo = 0.70;
  double score_hi = 1.00;
  double yes_rate = 0.9;
  int max_delay_ms = 0;
  int embedding_dim = 256;

  static MockOptions from_json(const nlohmann::json& j);
};

// The fixed phrase list the mock extractor recognizes in problem text.
const std::vector<std::string>& mock_concept_vocabulary();

// Offline backend whose every reply is a pure function of (model_name, prompt, seed).
// Replies are templated per task so the full pipeline runs without a model server.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendDescriptor descriptor);

  const MockOptions& options() const { return options_; }

 protected:
  CompletionExchange do_complete(const std::string& prompt, const DecodeParams& params) override;
  EmbeddingBatch do_embed(const std::vector<std::string>& texts) override;

 private:
  std::string respond(const std::string& prompt, Task task) const;
  std::uint64_t hash(const std::string& prompt, std::string_view salt) const;
  std::vector<float> embed_one(const std::string& text) const;

  MockOptions options_;
};

}  // namespace csynth
