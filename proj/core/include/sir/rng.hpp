#pragma once

#include <cstdint>
#include <random>

namespace sir {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Decorrelates a base seed into independent per-stream seeds.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed;
  std::uint64_t a = splitmix64(s);
  s ^= (stream + 1) * 0xD1B54A32D192ED03ULL;
  return splitmix64(s) ^ a;
}

// Seeded random source. All randomness in the library flows through Rng so
// runs are reproducible from a single 64-bit seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(seed), engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t integer(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
    return dist(engine_);
  }

  Rng derived(std::uint64_t stream) const { return Rng(derive_seed(base_, stream)); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t base_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sir
