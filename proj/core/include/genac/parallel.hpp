#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace genac {

// Runs fn(0..n-1) across up to `workers` threads. Each index must write only
// to its own output slot; combined with per-index derived RNG streams this
// keeps results identical for any worker count, including workers == 1
// (which runs inline).
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  const int nthreads = workers < n ? workers : n;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(nthreads));
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<int> next{0};
  for (int w = 0; w < nthreads; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace genac
