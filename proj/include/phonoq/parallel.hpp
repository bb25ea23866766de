#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace phonoq {

// Worker count: PHONOQ_THREADS if set, else hardware concurrency.
inline unsigned worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PHONOQ_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 1024));
    } catch (...) {
    }
  }
  return hw;
}

// Calls body(i) for i in [0, n). Each index is independent so the result
// never depends on how indices are spread over threads.
template <class F>
void parallel_for(std::size_t n, F&& body, unsigned threads = worker_count()) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr err;
  std::mutex m;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

// Pairwise sum keeps rounding error O(log n) and the order fixed.
template <class T, class It>
T pairwise_sum(It first, It last) {
  const auto n = std::distance(first, last);
  if (n <= 8) {
    T s{};
    for (; first != last; ++first) s += *first;
    return s;
  }
  It mid = first;
  std::advance(mid, n / 2);
  return pairwise_sum<T>(first, mid) + pairwise_sum<T>(mid, last);
}

}  // namespace phonoq
