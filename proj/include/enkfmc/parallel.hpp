#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace enkfmc {

inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, n). Work is split into contiguous static chunks,
// one per worker. Bodies must write only to their own index's slot, which
// makes results identical for every worker count by construction.
inline void parallel_for(std::int64_t n, int workers,
                         const std::function<void(std::int64_t)>& body) {
  if (n <= 0) return;
  const int w = std::min<std::int64_t>(resolve_workers(workers), n);
  if (w <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::int64_t chunk = (n + w - 1) / w;
  for (int t = 0; t < w; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        for (std::int64_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace enkfmc
