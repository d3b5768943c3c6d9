#pragma once

#include <cmath>
#include <cstdint>

namespace rcdepth {

// Counter-based splittable generator (splitmix64 finalizer over a keyed
// counter). Streams derived from (seed, stream id) are independent, so
// per-frame work can run in parallel and still reproduce bit-exactly.
class StreamRng {
 public:
  explicit StreamRng(uint64_t seed, uint64_t stream = 0)
      : key_(derive_key(seed, stream)) {}

  uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return mix(key_ ^ counter_);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n)
  uint64_t bounded(uint64_t n) {
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // Box-Muller; u1 kept away from 0
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    double two_pi = 6.283185307179586476925286766559;
    cached_ = mag * std::sin(two_pi * u2);
    have_cached_ = true;
    return mag * std::cos(two_pi * u2);
  }

  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static uint64_t derive_key(uint64_t seed, uint64_t stream) {
    return mix(mix(seed) ^ mix(stream * 0xD6E8FEB86659FD93ULL + 1));
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace rcdepth
