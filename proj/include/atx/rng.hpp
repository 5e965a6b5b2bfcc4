#pragma once
#include <cstdint>
#include <cmath>
#include "atx/types.hpp"

namespace atx {

// splitmix64; single u64 seed, platform-independent stream.
struct Rng {
  uint64_t state;
  explicit Rng(uint64_t seed) : state(seed) {}
  uint64_t next() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (next() >> 11) * 0x1.0p-53; }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian() {
    // Box-Muller; avoids log(0).
    double u1 = 0;
    while (u1 <= 0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }
  cplx cgaussian() {
    double u1 = 0;
    while (u1 <= 0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925287 * u2;
    return {r * std::cos(th), r * std::sin(th)};
  }
  // derive an independent stream; useful for per-sample determinism
  Rng fork(uint64_t salt) {
    Rng r(state ^ (0x632be59bd9b4e019ull * (salt + 1)));
    r.next();
    return r;
  }
};

}  // namespace atx
