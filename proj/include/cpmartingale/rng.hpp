#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace cpm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seeded random source with splittable substreams. Substream seeds are
/// derived from the base seed alone, so the substream layout does not
/// depend on how much the parent has already been consumed.
class RngHandle {
 public:
  explicit RngHandle(std::uint64_t seed) : base_seed_(seed), engine_(splitmix64(seed)) {}

  RngHandle substream(std::uint64_t index) const {
    return RngHandle(splitmix64(base_seed_ ^ splitmix64(index + 1)));
  }

  std::uint64_t seed() const { return base_seed_; }

  /// Uniform on [0, 1).
  double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform on (0, 1]; used for p-value tie breaking so p > 0 always.
  double uniform_open01() { return 1.0 - uniform01(); }

  double normal(double mean, double stddev) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

 private:
  std::uint64_t base_seed_;
  std::mt19937_64 engine_;
};

}  // namespace cpm
