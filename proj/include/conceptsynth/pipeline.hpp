#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "conceptsynth/backends.hpp"
#include "conceptsynth/config.hpp"
#include "conceptsynth/prompts.hpp"
#include "json.hpp"

namespace csynth {

// SIGINT/SIGTERM set a flag that stages check between checkpoint chunks.
void install_interrupt_handlers();
void request_interrupt();
bool interrupt_requested();
void clear_interrupt();

// Output files written into the run directory.
namespace outputs {
inline constexpr const char* kSeeds = "seeds.jsonl";
inline constexpr const char* kConceptsRaw = "concepts.raw.jsonl";
inline constexpr const char* kConceptsFiltered = "concepts.filtered.jsonl";
inline constexpr const char* kSimilarPairs = "concepts.similar_pairs.jsonl";
inline constexpr const char* kClusters = "clusters.jsonl";
inline constexpr const char* kKnowledgeBase = "knowledge_base.jsonl";
inline constexpr const char* kExtractSummary = "extract.summary.json";
inline constexpr const char* kGraphEdges = "graph.edges.jsonl";
inline constexpr const char* kCombinations = "combinations.jsonl";
inline constexpr const char* kGraphSummary = "graph.summary.json";
inline constexpr const char* kItems = "items.jsonl";
inline constexpr const char* kSynthesizeSummary = "synthesize.summary.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kHistogram = "similarity_histogram.csv";
}  // namespace outputs

// Every output file of a complete run, in stage order.
const std::vector<std::string>& all_output_files();

// One run directory, driven stage by stage. Each stage is split into item-level steps whose results
// are journaled and checkpointed, so an interrupted stage resumes where it stopped and produces the
// same files an uninterrupted run would.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  void extract();
  void graph();
  void synthesize();
  void analyze();
  void run_all();

  // Deletes journals and checkpoints of the named stages ("extract", "graph", "synthesize", "analyze").
  void reset_state(const std::vector<std::string>& stages);

  const RunConfig& config() const { return config_; }
  const std::filesystem::path& run_dir() const { return config_.paths.run_dir; }

 private:
  using Work = std::function<nlohmann::json(const std::string& id)>;

  // Runs `work` over every id not yet completed under `fingerprint` and returns one record per id.
  std::map<std::string, nlohmann::json> run_itemized(const std::string& step, const std::string& fingerprint,
                                                     const std::vector<std::string>& ids, const Work& work);
  void check_interrupt();

  BackendPtr backend(Role role);
  BackendPtr backend_by_id(const std::string& id);
  std::vector<BackendPtr> judges();
  BackendPtr reviewer();

  std::string stage_fingerprint(const std::string& stage) const;

  RunConfig config_;
  PromptLibrary prompts_;
  std::map<std::string, BackendPtr> backends_;
  std::size_t processed_ = 0;
};

// Entry point shared by the CLI: takes the run-directory lock and runs one subcommand
// ("extract", "graph", "synthesize", "analyze", "run-all").
void run_command(const std::string& command, const RunConfig& config, bool restart);

}  // namespace csynth
