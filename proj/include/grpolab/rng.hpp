#pragma once

#include <cstdint>
#include <cmath>
#include <span>
#include <vector>

namespace grpolab {

// Seeded xoshiro256++ stream with platform-independent distributions.
//
// Substreams are derived by a counter-based splitting rule: the state of
// stream k under master seed s is seeded from splitmix64 applied to
// (s, k).  Jobs that run concurrently therefore produce the same numbers
// regardless of scheduling or worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) { reseed(seed); }
  Rng(std::uint64_t seed, std::uint64_t stream) { reseed(mix(seed, stream)); }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

  void reseed(std::uint64_t seed);

  std::uint64_t next_u64();

  // uniform in [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), n >= 1, by rejection
  std::uint64_t uniform_below(std::uint64_t n);

  // standard normal via polar Box-Muller
  double normal();

  double chi2_1() { double z = normal(); return z * z; }

  // index sampled from unnormalized nonnegative weights
  int discrete(std::span<const double> weights);

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace grpolab
