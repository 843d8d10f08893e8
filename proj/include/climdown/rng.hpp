#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace climdown {

// Counter-based generator. With key = splitmix64(seed ^ splitmix64(s + 0x632be59bd9b4e019)),
// draw n (from 0) of stream `s` is splitmix64(key + n * 0x9e3779b97f4a7c15).
// Every stochastic step in the library draws from one of these so results are
// reproducible bit-for-bit across platforms, unlike std::*_distribution.
//
//   splitmix64(z): z += 0x9e3779b97f4a7c15;
//                  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
//                  z = (z ^ (z >> 27)) * 0x94d049bb133111eb;
//                  return z ^ (z >> 31);
//
// uniform() takes the top 53 bits; normal() is Box-Muller using two uniforms,
// the second value of each pair is discarded.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = state_ + counter_ * 0x9e3779b97f4a7c15ULL;
    ++counter_;
    return mix(z);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Independent child generator, keyed by `stream`.
  Rng split(std::uint64_t stream) const { return Rng(state_, stream + 1); }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
};

}  // namespace climdown
