/// @file rng.hpp
/// @brief Deterministic, platform-independent randomness. All stochastic code
/// derives per-task seeds from (master seed, task key) so results do not
/// depend on scheduling or worker count.
#pragma once

#include <cstdint>
#include <string_view>

namespace cf {

/// SplitMix64 stream; identical output on every platform.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [a,b).
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0,n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // rejection-free; modulo bias is negligible for n << 2^64 and does not
    // affect determinism
    return next() % n;
  }

  /// Uniform integer in [a,b] inclusive.
  int uniform_int(int a, int b) {
    return a + static_cast<int>(below(static_cast<std::uint64_t>(b - a + 1)));
  }
};

/// FNV-1a 64-bit hash; used for task keys and report fingerprints.
inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

/// Per-task seed from a master seed and a stable task key.
inline std::uint64_t task_seed(std::uint64_t master, std::string_view key) {
  std::uint64_t h = fnv1a(key);
  // mix master and key through one SplitMix64 round each
  Rng r(master ^ (h + 0x9e3779b97f4a7c15ull));
  r.next();
  return r.next();
}

}  // namespace cf
