#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace dnmd {

/// 64-bit mixer used to derive independent seed streams from one run seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Random stream. Distributions are implemented here rather than with
/// std::*_distribution so that draws are identical across standard library
/// implementations; the engine itself (mt19937_64) is specified by the
/// standard.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream derived from (seed, tag). Streams with distinct tags are
  /// statistically independent.
  static Rng stream(std::uint64_t seed, std::uint64_t tag) {
    return Rng(splitmix64(seed ^ splitmix64(tag)));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Lemire reduction, bias < n / 2^64.
  int uniform_int(int n) {
    using u128 = unsigned __int128;
    return static_cast<int>((u128(engine_()) * u128(n)) >> 64);
  }

  bool bernoulli(double p_true) { return uniform() < p_true; }

  /// Standard normal via Box-Muller. Consumes two uniforms per draw; the
  /// second variate is discarded so the stream advance per call is fixed.
  double normal() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[static_cast<std::size_t>(i)],
                v[static_cast<std::size_t>(uniform_int(i + 1))]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dnmd
