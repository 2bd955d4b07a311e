#pragma once

// Shared utilities: a deterministic PRNG (stable across platforms, unlike the
// std:: distributions) and a slot-writing parallel map used for independent
// work items.  Parallel results are written to preassigned slots, never
// reduced, so thread count does not affect any computed value.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fdx {

// SplitMix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Independent child stream (for parallel sampling with a single seed).
  Rng fork() { return Rng(next_u64() ^ 0xd1b54a32d192ed03ULL); }

 private:
  std::uint64_t state_;
};

inline int hardware_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs body(i) for i in [0, nitems).  nthreads <= 0 means auto.  Exceptions
/// thrown by work items are rethrown on the calling thread.
inline void parallel_for(int nitems, int nthreads, const std::function<void(int)>& body) {
  if (nthreads <= 0) nthreads = hardware_threads();
  nthreads = std::min(nthreads, nitems);
  if (nthreads <= 1) {
    for (int i = 0; i < nitems; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(nthreads);
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = t; i < nitems; i += nthreads) body(i);
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

inline double sign_pow(double y, double p) {
  // odd continuation of y^p across zero
  return y >= 0 ? std::pow(y, p) : -std::pow(-y, p);
}

/// (e^z - 1)/z with a series fallback near zero.
inline double phi1(double z) {
  if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
  return std::expm1(z) / z;
}

/// (e^z - 1 - z)/z^2 with a series fallback near zero.
inline double phi2(double z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 6.0 + z * z / 24.0;
  return (std::expm1(z) - z) / (z * z);
}

}  // namespace fdx
