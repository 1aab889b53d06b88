#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace loopcycle {

// Threads to use for `requested` (0 means hardware concurrency).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(r) for r in [0, count) on a pool and returns the results in index
// order, so any later reduction is independent of scheduling. The first
// exception thrown by a task is rethrown after the pool drains.
template <class Fn>
auto run_replicas(std::int64_t count, int threads, Fn fn) -> std::vector<decltype(fn(std::int64_t{}))> {
  using T = decltype(fn(std::int64_t{}));
  std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  const int n = std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(count, 1));
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    while (true) {
      std::int64_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        out[static_cast<std::size_t>(r)] = fn(r);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace loopcycle
