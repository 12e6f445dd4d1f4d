#pragma once

#include <cstdint>
#include <random>

namespace ndop {

/// Seeded random stream.
///
/// Engine: `std::mt19937_64`, whose output sequence is fully specified by the
/// C++ standard, so a seed yields the same stream on every conforming
/// platform. Uniform doubles take the top 53 bits of one engine draw.
/// Gaussians use the Marsaglia polar method (pairs are cached), which is
/// written out here rather than delegated to `std::normal_distribution`
/// because the latter is implementation-defined.
///
/// Independent sub-streams are derived with `split(stream_id)`, which mixes
/// the parent seed and the id through SplitMix64; the parent stream is not
/// advanced.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal N(0, 1).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  Rng split(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used for deriving seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace ndop
