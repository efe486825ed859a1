/**
 * cellsim
 *
 * Minimal fixed-size worker pool: independent units are claimed through an
 * atomic cursor, results land in caller-owned slots, so the output is
 * deterministic regardless of scheduling.
 */

#ifndef CELLSIM_WORKER_POOL_HPP_
#define CELLSIM_WORKER_POOL_HPP_

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace cellsim {

template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn &&fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  const int n_threads = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    threads.emplace_back([&]() {
      while (true) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= count) break;
        fn(i);
      }
    });
  }
  for (std::thread &t : threads) t.join();
}

}  // namespace cellsim

#endif  // CELLSIM_WORKER_POOL_HPP_
