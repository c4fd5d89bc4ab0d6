#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "hawkesbin/errors.hpp"

namespace hawkesbin {

/// Worker count taken from HAWKESBIN_THREADS when set, otherwise the
/// hardware concurrency (at least 1).
inline unsigned default_thread_count() {
  if (const char* env = std::getenv("HAWKESBIN_THREADS")) {
    char* end = nullptr;
    const unsigned long parsed = std::strtoul(env, &end, 10);
    require(end != env && *end == '\0' && parsed >= 1 && parsed <= 4096,
            ErrorCode::invalid_parameter,
            "HAWKESBIN_THREADS must be a positive integer");
    return static_cast<unsigned>(parsed);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs body(0) .. body(count-1) across a transient thread pool. `threads`
/// 0 defers to default_thread_count(); 1 stays on the calling thread. The
/// first exception wins, later indices are skipped, and it is rethrown after
/// all workers drain. Bodies must write only to their own index's slot.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& body, unsigned threads = 0) {
  if (count == 0) return;
  if (threads == 0) threads = default_thread_count();
  if (threads > count) threads = static_cast<unsigned>(count);
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t k = next.fetch_add(1, std::memory_order_relaxed);
      if (k >= count) return;
      try {
        body(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hawkesbin
