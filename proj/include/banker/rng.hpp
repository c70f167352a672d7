#pragma once

#include <cstdint>
#include <random>

namespace banker {

// Increment of the splitmix64 generator. Per-run seeds are derived as
// splitmix64(master_seed + kSeedGamma * (run_index + 1)).
inline constexpr std::uint64_t kSeedGamma = 0x9E3779B97F4A7C15ULL;

// Stream identifiers mixed into a run seed so the policy and the environment
// draw from unrelated streams.
inline constexpr std::uint64_t kPolicyStream = 0x1;
inline constexpr std::uint64_t kEnvironmentStream = 0x2;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += kSeedGamma;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_run_seed(std::uint64_t master_seed,
                                        std::uint64_t run_index) {
  return splitmix64(master_seed + kSeedGamma * (run_index + 1));
}

constexpr std::uint64_t derive_stream_seed(std::uint64_t run_seed,
                                           std::uint64_t stream) {
  return splitmix64(run_seed ^ splitmix64(stream));
}

// Top 53 bits of a 64-bit word mapped to [0, 1).
constexpr double to_unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stateless uniform in [0, 1) keyed by (seed, a, b). Used for oblivious
// environment randomness that must not depend on the order of queries.
constexpr double keyed_uniform(std::uint64_t seed, std::uint64_t a,
                               std::uint64_t b) {
  return to_unit_interval(splitmix64(seed ^ splitmix64(a ^ splitmix64(b))));
}

// Seeded policy randomness. mt19937_64 output is fixed by the standard and
// the double conversion above is explicit, so streams are portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return to_unit_interval(engine_()); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace banker
