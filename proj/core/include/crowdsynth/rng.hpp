#pragma once

#include <cstdint>
#include <random>

namespace crowdsynth {

/// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for stream `stream` of a run seeded with `seed`. Batch jobs derive
/// per-image seeds this way so that results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Seeded generator with portable distributions. The standard engines have a
/// fully specified output sequence but the standard distributions do not, so
/// the transforms below are implemented here to keep outputs identical across
/// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform in [lo, hi). Returns lo when hi <= lo.
  double uniform(double lo, double hi);
  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool bernoulli(double p);
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace crowdsynth
