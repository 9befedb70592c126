#pragma once

#include <cstdint>

namespace nyscl {

// xoshiro256** seeded through splitmix64. Every consumer derives its own
// stream from (seed, purpose) so adding draws in one place never shifts
// another. Normals use Box-Muller so the sequence only depends on libm
// log/sqrt/cos/sin.
enum class Stream : std::uint64_t {
  Means = 1,
  Assignments = 2,
  Noise = 3,
  Landmarks = 4,
  Frequencies = 5,
  Decoder = 6,
  Baseline = 7,
  Probe = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound), unbiased (rejection).
  std::uint64_t below(std::uint64_t bound);
  double normal();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace nyscl
