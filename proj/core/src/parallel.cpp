#include "funkrad/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace funkrad {

namespace {

std::atomic<int> g_max_threads{0};

int default_threads() {
  if (const char* env = std::getenv("FUNKRAD_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 0); }

int max_threads() {
  int n = g_max_threads.load();
  return n > 0 ? n : default_threads();
}

namespace detail {

void parallel_for(int begin, int end, const std::function<void(int, int)>& body) {
  const int count = end - begin;
  if (count <= 0) return;
  const int threads = std::min(max_threads(), count);
  if (threads <= 1) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = begin + t * chunk;
    const int hi = std::min(lo + chunk, end);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail
}  // namespace funkrad
