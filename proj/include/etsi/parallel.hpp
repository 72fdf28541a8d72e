#pragma once

// Minimal fork-join loop. Work items are claimed through an atomic counter;
// callers write results into per-index slots and reduce afterwards in index
// order, which keeps every reduction independent of the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace etsi {

/// Worker cap used when a call passes threads = 0. Zero means one per
/// hardware thread.
void set_max_threads(std::size_t n);
std::size_t max_threads();

template <class F>
void parallel_for(std::size_t n, F&& body, std::size_t threads = 0) {
  if (n == 0) return;
  std::size_t workers = threads ? threads : max_threads();
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;

  auto run = [&] {
    while (!stop.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        // Of the failures seen, report the lowest index.
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
        stop.store(true, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace etsi
