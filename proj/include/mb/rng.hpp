#pragma once
// Counter-based deterministic PRNG (SplitMix64). All randomness in the
// toolkit flows through this type so experiments replay bit-exactly from
// their seed. An Rng is single-owner mutable state: callers that parallelize
// derive one Rng per unit of work (e.g. seed ^ trial_index) instead of
// sharing a stream.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mb {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // SplitMix64: increment the counter by the golden-ratio constant and mix.
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n); rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller. Consumes exactly two raw draws so the
  // stream position is input-independent.
  double normal();

  // First k entries of a uniform random permutation of [0, m).
  // Partial Fisher-Yates; throws if k > m.
  std::vector<std::size_t> shuffle_k(std::size_t m, std::size_t k);

 private:
  std::uint64_t state_;
};

}  // namespace mb
