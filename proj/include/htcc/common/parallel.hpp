#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace htcc {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Each index is
// processed exactly once; the first exception is rethrown after joining.
template <typename Fn>
void run_parallel(std::size_t count, int threads, const Fn& fn) {
  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, count ? count : 1);
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (std::size_t w = 0; w < n_workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace htcc
