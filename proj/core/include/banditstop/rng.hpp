#pragma once

#include <cstdint>
#include <random>

namespace banditstop {

/// splitmix64 finalizer. Bijective 64-bit avalanche mix.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of replication `index` under `master`. Test vectors live in
/// docs/seed_vectors.md; any reimplementation must reproduce them.
///
///   derive_seed(m, i) = mix64(m ^ mix64(i + 0x9E3779B97F4A7C15))
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

// Stream tags used to split a replication seed into independent sub-streams.
inline constexpr std::uint64_t kTrajectoryStream = 0x7472616aULL;  // "traj"
inline constexpr std::uint64_t kRegretStream = 0x72656772ULL;      // "regr"
inline constexpr std::uint64_t kInferenceStream = 0x696e6665ULL;   // "infe"
inline constexpr std::uint64_t kPilotOffset = 0x8000000000000000ULL;

/// Seeded random stream. Value type; copying forks the exact state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal();
  bool bernoulli(double p);

  /// Independent stream keyed on (seed, tag); does not advance this stream.
  Rng substream(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace banditstop
