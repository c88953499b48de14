#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace nodenorm {

/// Deterministic random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard <random> distributions are implementation-defined,
/// so every conversion (uniform doubles, bounded integers, normals, shuffles)
/// is done here to keep streams identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed for an independent sub-stream of `seed`, keyed by `tag`.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (one draw per pair of uniforms, no cache).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::swap(pool[i], pool[i + below(n - i)]);
    }
    pool.resize(k < n ? k : n);
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

/// Fixed tags for the sub-streams of one training run.
enum class Stream : std::uint64_t {
  kSplit = 1,
  kInit = 2,
  kDropout = 3,
  kFeatureMask = 4,
  kLipschitz = 5,
  kGraph = 6,
};

inline Rng make_stream(std::uint64_t seed, Stream tag) {
  return Rng(Rng::derive(seed, static_cast<std::uint64_t>(tag)));
}

}  // namespace nodenorm
