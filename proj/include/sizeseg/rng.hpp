#pragma once

#include <array>
#include <cstdint>

namespace sizeseg {

/// Portable seedable generator (xoshiro256** seeded through splitmix64).
///
/// Every draw is defined bit-for-bit by this file, so datasets, corruption
/// noise and parameter init are reproducible across compilers and standard
/// libraries (std::normal_distribution is not).
///
/// Stream splitting: `split(id)` derives an independent generator from the
/// construction seed and `id` only, regardless of how many numbers the parent
/// has drawn. Per-image work uses `split(image_index)`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  int uniform_int(int lo, int hi);
  /// Standard normal via the Marsaglia polar method.
  double normal();
  double normal(double mean, double stddev);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace sizeseg
