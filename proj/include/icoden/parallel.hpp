#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace icoden {

// Runs work(i) for i in [0, count) on up to `workers` threads. Tasks must be
// independent; callers that reduce results do so afterwards in index order so
// outputs do not depend on scheduling.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t)>& work) {
  if (count == 0) return;
  const std::size_t n_threads =
      std::min<std::size_t>(count, workers < 1 ? 1 : static_cast<std::size_t>(workers));
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        work(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(body);
  for (auto& t : threads) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

inline int default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

}  // namespace icoden
