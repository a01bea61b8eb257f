#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace glam {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
/// visited exactly once; results should be written to per-index slots.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace glam
