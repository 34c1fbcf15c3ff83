#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <thread>
#include <vector>

namespace gpda {

/// Runs fn(i) for i in [0, count) across at most `threads` workers with a
/// static block partition. Each index must touch disjoint state; there are no
/// shared accumulators, so results do not depend on the worker count.
template <typename Fn>
void parallel_for(Eigen::Index count, int threads, Fn&& fn) {
  if (count <= 0) return;
  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (workers == 1) {
    for (Eigen::Index i = 0; i < count; ++i) fn(i);
    return;
  }
  const Eigen::Index chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    const Eigen::Index lo = w * chunk;
    const Eigen::Index hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (Eigen::Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (Eigen::Index i = 0; i < std::min(chunk, count); ++i) fn(i);
  for (auto& t : pool) t.join();
}

}  // namespace gpda
