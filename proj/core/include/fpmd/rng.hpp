#pragma once

#include <cstdint>
#include <random>

namespace fpmd {

/// SplitMix64 mixing step, used to derive independent stream seeds from a
/// single master seed without correlated low bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream));
}

/// Thin deterministic RNG wrapper. One instance per logical stream; all
/// draws go through named methods so call sites stay auditable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  float uniform(float lo = 0.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    return d(gen_);
  }

  double uniform_double(double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }

  float normal(float mu = 0.0f, float sigma = 1.0f) {
    std::normal_distribution<float> d(mu, sigma);
    return d(gen_);
  }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(gen_);
  }

  std::uint64_t next_u64() { return gen_(); }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fpmd
