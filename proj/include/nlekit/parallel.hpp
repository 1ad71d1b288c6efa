#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace nlekit {

/// NLEKIT_WORKERS if set and positive, else the hardware thread count.
inline unsigned default_workers() {
  if (const char* env = std::getenv("NLEKIT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
/// independent; the first exception thrown is rethrown after all threads join.
/// fn may also take (i, worker) with worker in [0, workers).
namespace detail {
template <typename F>
void call(F& fn, std::size_t i, unsigned w) {
  if constexpr (std::is_invocable_v<F&, std::size_t, unsigned>)
    fn(i, w);
  else
    fn(i);
}
}  // namespace detail

template <typename F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) detail::call(fn, i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  auto body = [&](unsigned w) {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        detail::call(fn, i, w);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nlekit
