#include "atx/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace atx {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(); }

void set_thread_count(int n) {
  if (n <= 0) n = (int)std::max(1u, std::thread::hardware_concurrency());
  g_threads.store(n);
}

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
  int nt = std::min<int64_t>(g_threads.load(), std::max<int64_t>(1, n));
  if (nt <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  int64_t chunk = (n + nt - 1) / nt;
  std::exception_ptr err;
  std::mutex err_mu;
  for (int t = 0; t < nt; ++t) {
    int64_t lo = t * chunk, hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace atx
