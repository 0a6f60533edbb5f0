#ifndef CHMM_RANDOM_HPP
#define CHMM_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace chmm {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 1) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(mix64(seed)), static_cast<std::uint32_t>(mix64(seed) >> 32)};
    engine_.seed(seq);
  }

  /// Stream `id` of the master seed. Streams depend only on (seed, path), so
  /// work units draw identical numbers whatever thread runs them.
  static Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(mix64(mix64(seed) ^ mix64(id + 0x5bd1e995ULL))); }
  static Rng stream(std::uint64_t seed, std::uint64_t id, std::uint64_t sub) {
    return Rng(mix64(mix64(mix64(seed) ^ mix64(id + 0x5bd1e995ULL)) ^ mix64(sub + 0x27d4eb2fULL)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(engine_); }

  /// Draws an index with probability proportional to weights[i]; `total` is
  /// their sum. Zero-weight entries are never returned.
  int categorical(std::span<const double> weights, double total) {
    const double u = uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
      if (weights[i] <= 0.0) continue;
      acc += weights[i];
      last = i;
      if (u < acc) return i;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace chmm

#endif  // CHMM_RANDOM_HPP
