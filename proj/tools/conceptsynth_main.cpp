// conceptsynth: concept-graph driven problem synthesis, one stage per subcommand.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "conceptsynth/config.hpp"
#include "conceptsynth/error.hpp"
#include "conceptsynth/pipeline.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string run_dir;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<double> hub_fraction;
  std::optional<int> min_weight;
  std::optional<std::size_t> community_cap;
  std::optional<std::size_t> interrupt_after;
  std::optional<std::size_t> max_in_flight;
  bool restart = false;
  std::string log_level = "info";
};

nlohmann::json effective_document(const Flags& f) {
  auto doc = csynth::load_config_document(f.config_path);
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw csynth::ConfigError("--set expects key=value, got \"" + kv + "\"");
    csynth::apply_override(doc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!f.run_dir.empty()) doc["paths"]["run_dir"] = f.run_dir;
  if (f.seed) doc["random_seed"] = *f.seed;
  if (f.budget) doc["graph"]["budget"] = *f.budget;
  if (f.hub_fraction) doc["graph"]["hub_fraction"] = *f.hub_fraction;
  if (f.min_weight) doc["graph"]["three_hop_min_weight"] = *f.min_weight;
  if (f.community_cap) doc["graph"]["community_cap"] = *f.community_cap;
  if (f.interrupt_after) doc["runtime"]["interrupt_after"] = *f.interrupt_after;
  if (f.max_in_flight) doc["runtime"]["max_in_flight"] = *f.max_in_flight;
  return doc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthesize problems from a concept co-occurrence graph built over a seed corpus"};
  app.require_subcommand(1);
  Flags flags;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"extract", "extract, filter and cluster key concepts into a knowledge base"},
      {"graph", "build the concept graph and sample concept combinations"},
      {"synthesize", "generate, score and solve problems for each combination"},
      {"analyze", "write the run report"},
      {"run-all", "run every stage in order"},
  };
  std::string chosen;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", flags.config_path, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--run-dir", flags.run_dir, "run directory (overrides paths.run_dir)");
    sub->add_option("--set", flags.sets, "override a config key, e.g. --set graph.hub_fraction=0.02");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--budget", flags.budget, "combinations kept per kind");
    sub->add_option("--hub-fraction", flags.hub_fraction, "fraction of nodes treated as hubs");
    sub->add_option("--min-weight", flags.min_weight, "minimum bottleneck weight for three-hop pairs");
    sub->add_option("--community-cap", flags.community_cap, "maximum communities per size");
    sub->add_option("--interrupt-after", flags.interrupt_after, "stop with a checkpoint after this many items");
    sub->add_option("--max-in-flight", flags.max_in_flight, "items processed concurrently");
    sub->add_flag("--restart", flags.restart, "discard checkpoints of the stages being run");
    sub->add_option("--log-level", flags.log_level, "trace, debug, info, warn, error or off");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(csynth::ExitCode::kValidation);
  }

  auto logger = spdlog::stderr_color_mt("conceptsynth");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(flags.log_level));

  try {
    const auto config = csynth::parse_config(effective_document(flags));
    csynth::install_interrupt_handlers();
    csynth::run_command(chosen, config, flags.restart);
    return 0;
  } catch (const csynth::Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.exit_code());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed record: {}", e.what());
    return static_cast<int>(csynth::ExitCode::kValidation);
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(csynth::ExitCode::kValidation);
  }
}
