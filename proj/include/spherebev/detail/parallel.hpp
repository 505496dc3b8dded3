#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spherebev::detail {

/// Worker cap from SPHEREBEV_THREADS (0 or unset means hardware concurrency).
/// Read once per process.
inline std::size_t thread_cap() {
  static const std::size_t cap = [] {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("SPHEREBEV_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) return static_cast<std::size_t>(v) < hw ? static_cast<std::size_t>(v) : hw;
    }
    return hw;
  }();
  return cap;
}

/// Runs fn(begin, end) over a static partition of [0, n). Each index is
/// processed exactly once and outputs must be written to disjoint slots, so
/// results are bit-identical to a sequential run regardless of thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min(thread_cap(), n == 0 ? std::size_t{1} : n);
  if (workers <= 1 || n < 2048) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto run = [&](std::size_t begin, std::size_t end) {
    try {
      fn(begin, end);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  for (std::size_t w = 1; w < workers; ++w) {
    pool.emplace_back(run, n * w / workers, n * (w + 1) / workers);
  }
  run(0, n / workers);
  pool.clear();  // join
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace spherebev::detail
