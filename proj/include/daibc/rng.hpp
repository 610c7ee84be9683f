#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace daibc {

// Deterministic RNG stream. All randomness in the toolkit flows through this
// wrapper so that seeded runs are bit-reproducible regardless of the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (sine branch discarded; stateless stream).
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Uniform integer in [0, n).
  int below(int n) {
    int k = static_cast<int>(uniform01() * static_cast<double>(n));
    return k >= n ? n - 1 : k;
  }

  // Independent child stream keyed off this stream's seed; derivation does not
  // consume state, so sibling streams are order-independent.
  Rng derive(uint64_t key) const { return Rng(mix(seed_, key)); }

  static uint64_t mix(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the combined words
    uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace daibc
