#ifndef KOB_PARALLEL_HPP
#define KOB_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace kob {

/// Run fn(i) for i in [0, n_tasks) on up to n_threads workers.
///
/// Tasks are striped across workers by index, and callers are expected to
/// write results into preallocated slots keyed by i, so the outcome is
/// identical for any thread count. The first exception thrown by a task is
/// rethrown on the calling thread.
inline void parallel_for(std::size_t n_tasks, unsigned n_threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n_threads <= 1 || n_tasks <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  unsigned workers = n_threads;
  if (workers > n_tasks) workers = static_cast<unsigned>(n_tasks);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n_tasks; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace kob

#endif  // KOB_PARALLEL_HPP
