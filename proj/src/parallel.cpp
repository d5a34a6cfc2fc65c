#include "gen3d/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace gen3d {

int thread_budget() {
  // Read per call so the cap can change within one process.
  if (const char* env = std::getenv("GEN3D_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for_chunks(int chunk_count, const std::function<void(int)>& fn) {
  if (chunk_count <= 0) return;
  const int workers = std::min(thread_budget(), chunk_count);
  if (workers <= 1) {
    for (int i = 0; i < chunk_count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto run = [&] {
    for (;;) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= chunk_count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace gen3d
