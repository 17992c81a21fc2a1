#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace birar {

// splitmix64 step; used to derive independent seeds from (seed, stream ids).
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return mix64(mix64(mix64(mix64(base) ^ a) ^ b) ^ c);
}

// Deterministic RNG wrapper. Sampling is implemented directly on the raw
// mt19937_64 stream so sequences do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // Uniform integer in [0, n), rejection-sampled.
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("rng: below(0)");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  // Uniform double in [0, 1) with 53 bits.
  double real01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Index sampled proportionally to non-negative weights.
  size_t weighted(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("rng: weights sum to zero");
    double u = real01() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u < 0.0) return i;
    }
    return weights.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace birar
