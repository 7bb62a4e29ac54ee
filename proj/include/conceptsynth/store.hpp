#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "conceptsynth/error.hpp"
#include "conceptsynth/types.hpp"
#include "json.hpp"

namespace csynth {

namespace fs = std::filesystem;

// Reads a line-delimited seed corpus. Records follow {"id"?, "question", "solution"}.
// Records without an id get a content-addressed one. Errors name the 1-based line.
std::vector<SeedExample> load_seed_corpus(const fs::path& path);

// Id for a seed lacking one: hash of its canonicalized question/solution payload.
std::string seed_content_id(const std::string& question, const std::string& solution);

// Writes `contents` to a sibling temp file, fsyncs, then renames over `path`.
// `before_commit` runs after the temp file is durable and before the rename; tests use it
// to simulate a crash. If it throws, the target is left untouched.
void atomic_write_file(const fs::path& path, const std::string& contents,
                       const std::function<void()>& before_commit = {});

std::string read_file(const fs::path& path);

template <typename T>
void write_records(const fs::path& path, const std::vector<T>& records) {
  std::string out;
  for (const auto& r : records) {
    out += nlohmann::json(r).dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

// Parses one JSON object per nonblank line; errors name the 1-based line.
std::vector<nlohmann::json> read_json_lines(const fs::path& path);

template <typename T>
std::vector<T> read_records(const fs::path& path) {
  std::vector<T> out;
  std::size_t line = 0;
  for (const auto& j : read_json_lines(path)) {
    ++line;
    try {
      out.push_back(j.get<T>());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_checkpoint(const StageCheckpoint& checkpoint, const fs::path& path);
std::optional<StageCheckpoint> read_checkpoint(const fs::path& path);

// Throws CheckpointError when the checkpoint was written under a different configuration.
void require_resumable(const StageCheckpoint& checkpoint, const std::string& config_fingerprint);

// all_ids minus the completed set, in sorted order.
std::vector<std::string> select_resumable_work(const std::vector<std::string>& all_ids,
                                               const StageCheckpoint& checkpoint,
                                               const std::string& config_fingerprint);

// Append-only record journal. Each append is flushed and fsynced before returning.
// A trailing partial line (torn write) is ignored on read.
class Journal {
 public:
  explicit Journal(fs::path path);
  void append(const std::vector<nlohmann::json>& records) const;
  std::vector<nlohmann::json> read_all() const;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Exclusive advisory lock on a run directory, released on destruction or process exit.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace csynth
