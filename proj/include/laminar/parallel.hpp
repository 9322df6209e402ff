#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace laminar {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// handled exactly once, so bodies that only write slot i give results
// independent of the thread count. The first exception is rethrown.
template <class Body>
void parallel_for(long long n, int threads, Body&& body) {
  if (threads <= 1 || n < 2) {
    for (long long i = 0; i < n; ++i) body(i);
    return;
  }
  const long long workers = std::min<long long>(threads, n);
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (long long w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long long i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace laminar
