#pragma once
// Index-parallel helper. Results are written to per-index slots and any
// reduction happens afterwards in index order, so outputs are identical for
// every worker count. S2S_NUM_WORKERS caps the pool.

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace s2s {

inline int worker_count(int tasks) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("S2S_NUM_WORKERS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (...) {
    }
  }
  return std::max(1, std::min(n, tasks));
}

template <typename F>
void parallel_for(int count, F&& fn) {
  const int workers = worker_count(count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w]() {
      for (int i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace s2s
