#include "conceptsynth/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "conceptsynth/hashing.hpp"

namespace csynth {
namespace {

using nlohmann::json;

std::string errno_message() { return std::strerror(errno); }

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError("write failed for " + path.string() + ": " + errno_message());
    }
    off += static_cast<std::size_t>(n);
  }
}

void fsync_dir(const fs::path& dir) {
  const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) return;
  ::fsync(fd);
  ::close(fd);
}

}  // namespace

std::string seed_content_id(const std::string& question, const std::string& solution) {
  const json payload{{"question", question}, {"solution", solution}};
  return content_id("seed-", payload.dump());
}

std::vector<SeedExample> load_seed_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open seed corpus " + path.string());

  std::vector<SeedExample> out;
  std::map<std::string, std::size_t> first_line;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ", line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw ValidationError(where + ": record is not a JSON object");
    if (!j.contains("id") || j["id"].is_null()) {
      if (j.contains("question") && j["question"].is_string() && j.contains("solution") && j["solution"].is_string()) {
        j["id"] = seed_content_id(j["question"].get<std::string>(), j["solution"].get<std::string>());
      }
    }
    SeedExample seed;
    try {
      seed = j.get<SeedExample>();
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (seed.id.empty()) throw ValidationError(where + ": field \"id\" is empty");
    auto [it, inserted] = first_line.emplace(seed.id, line_no);
    if (!inserted) {
      throw ValidationError(path.string() + ": duplicate id \"" + seed.id + "\" on lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    out.push_back(std::move(seed));
  }
  return out;
}

void atomic_write_file(const fs::path& path, const std::string& contents, const std::function<void()>& before_commit) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());

  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw StorageError("cannot create " + tmp.string() + ": " + errno_message());
  try {
    write_all(fd, contents, tmp);
    if (::fsync(fd) != 0) throw StorageError("fsync failed for " + tmp.string() + ": " + errno_message());
  } catch (...) {
    ::close(fd);
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  ::close(fd);

  if (before_commit) before_commit();

  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    const std::string msg = errno_message();
    std::error_code ec;
    fs::remove(tmp, ec);
    throw StorageError("rename to " + path.string() + " failed: " + msg);
  }
  fsync_dir(dir);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_json_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StorageError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
  }
  return out;
}

void write_checkpoint(const StageCheckpoint& checkpoint, const fs::path& path) {
  atomic_write_file(path, json(checkpoint).dump() + "\n");
}

std::optional<StageCheckpoint> read_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return json::parse(read_file(path)).get<StageCheckpoint>();
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
  }
}

void require_resumable(const StageCheckpoint& checkpoint, const std::string& config_fingerprint) {
  if (checkpoint.config_fingerprint != config_fingerprint) {
    throw CheckpointError("checkpoint for stage \"" + checkpoint.stage_name +
                          "\" was written under a different configuration (fingerprint " +
                          checkpoint.config_fingerprint + ", current " + config_fingerprint +
                          "); resumption refused, restart the stage with --restart or use a fresh run directory");
  }
}

std::vector<std::string> select_resumable_work(const std::vector<std::string>& all_ids,
                                               const StageCheckpoint& checkpoint,
                                               const std::string& config_fingerprint) {
  require_resumable(checkpoint, config_fingerprint);
  std::vector<std::string> pending;
  for (const auto& id : all_ids) {
    if (!checkpoint.completed_item_ids.contains(id)) pending.push_back(id);
  }
  std::sort(pending.begin(), pending.end());
  pending.erase(std::unique(pending.begin(), pending.end()), pending.end());
  return pending;
}

Journal::Journal(fs::path path) : path_(std::move(path)) {}

void Journal::append(const std::vector<json>& records) const {
  if (records.empty()) return;
  if (!path_.parent_path().empty()) fs::create_directories(path_.parent_path());
  std::string data;
  for (const auto& r : records) {
    data += r.dump();
    data += '\n';
  }
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw StorageError("cannot open journal " + path_.string() + ": " + errno_message());
  try {
    write_all(fd, data, path_);
    if (::fsync(fd) != 0) throw StorageError("fsync failed for " + path_.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::vector<json> Journal::read_all() const {
  std::vector<json> out;
  if (!fs::exists(path_)) return out;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      // Torn tail from an interrupted append; everything before it is intact.
      break;
    }
  }
  return out;
}

RunLock::RunLock(const fs::path& run_dir) {
  fs::create_directories(run_dir);
  const fs::path lock_path = run_dir / ".lock";
  fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd_ < 0) throw StorageError("cannot open lock file " + lock_path.string() + ": " + errno_message());
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    throw StorageError("run directory " + run_dir.string() + " is locked by another process");
  }
}

RunLock::~RunLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

}  // namespace csynth
