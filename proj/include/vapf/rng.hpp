#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace vapf {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the stream identified by (seed, key). Streams with different
/// keys are independent, so per-sample generation can run in any order.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t key) {
  return mix64(mix64(seed) ^ mix64(key + 0x632BE59BD9B4E019ULL));
}

/// Platform-stable random source. std::mt19937_64 output is fully specified
/// by the standard; the distributions below are written out by hand because
/// the standard library ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t key) : engine_(stream_seed(seed, key)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Normal truncated to [-2σ, 2σ] by resampling.
  double truncated_normal(double stddev) {
    double z;
    do {
      z = normal();
    } while (z < -2.0 || z > 2.0);
    return z * stddev;
  }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace vapf
