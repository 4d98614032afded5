#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

namespace isarah {

/// Worker count from the ISARAH_WORKERS environment variable, else the hardware
/// concurrency (at least 1).
int default_workers();

/// Evaluates fn(0), ..., fn(count - 1) on up to `workers` threads (0 = default_workers()).
/// Results are stored by index, so the output never depends on scheduling. If any call
/// throws, the exception from the lowest index is rethrown after all workers stop.
template <class Fn>
auto parallel_map(std::int64_t count, int workers, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::int64_t>> {
  using Result = std::invoke_result_t<Fn&, std::int64_t>;
  std::vector<Result> results(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
  if (count <= 0) return results;
  if (workers <= 0) workers = default_workers();
  workers = static_cast<int>(std::min<std::int64_t>(workers, count));

  std::vector<std::exception_ptr> errors(results.size());
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&] {
    // A claimed index always runs, so every index below a failing one is evaluated.
    while (!failed) {
      const std::int64_t i = next++;
      if (i >= count) break;
      try {
        results[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        failed = true;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace isarah
