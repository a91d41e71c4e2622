#pragma once

#include <cstdint>
#include <string_view>

namespace hwopt {

// Deterministic PRNG (xoshiro256** seeded via splitmix64). Gaussian draws use
// Box-Muller on our own uniform bits so sequences are identical across
// standard libraries. Child streams are derived from the base seed and a tag,
// not from the current state, so call interleaving does not change them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();                      // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal
  double normal(double mean, double stddev);
  int uniform_int(int n);                  // [0, n)

  Rng split(std::string_view tag, std::uint64_t idx = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hwopt
