#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace csynth {

// Value or captured failure for one slot of a batch.
template <typename T>
struct Outcome {
  std::optional<T> value;
  std::exception_ptr error;
  std::string error_message;

  bool ok() const { return value.has_value(); }
  const T& get() const {
    if (error) std::rethrow_exception(error);
    return *value;
  }
};

class Semaphore {
 public:
  explicit Semaphore(std::size_t permits) : permits_(permits) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return permits_ > 0; });
    --permits_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      ++permits_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t permits_;
};

// Runs every request with at most `max_in_flight` outstanding at once. Results come back in
// input order; a throwing request fills its own slot without disturbing the others.
template <typename T>
std::vector<Outcome<T>> run_bounded(const std::vector<std::function<T()>>& requests, std::size_t max_in_flight) {
  if (max_in_flight < 1) throw std::invalid_argument("run_bounded: max_in_flight must be >= 1");
  std::vector<Outcome<T>> results(requests.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      try {
        results[i].value.emplace(requests[i]());
      } catch (const std::exception& e) {
        results[i].error = std::current_exception();
        results[i].error_message = e.what();
      } catch (...) {
        results[i].error = std::current_exception();
        results[i].error_message = "unknown error";
      }
    }
  };

  const std::size_t workers = std::min(max_in_flight, requests.size());
  if (workers <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace csynth
