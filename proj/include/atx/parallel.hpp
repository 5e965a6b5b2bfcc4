#pragma once
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace atx {

// Process-wide worker count; 1 by default so results never depend on the
// machine unless the caller opts in.
int thread_count();
void set_thread_count(int n);

// Static block partition of [0,n). Each index is written by exactly one
// worker, so outputs are bit-identical for any thread count.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

}  // namespace atx
