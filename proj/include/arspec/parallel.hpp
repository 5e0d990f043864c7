#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace arspec {

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// handled by exactly one worker; the first exception is rethrown after all
// workers join.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ARSPEC_THREADS if set and positive, otherwise hardware concurrency.
inline std::size_t default_threads() {
  if (const char* env = std::getenv("ARSPEC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace arspec
