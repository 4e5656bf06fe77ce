#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mcl {

// Seedable generator with named streams. A stream's engine seed is
// splitmix64(seed ^ fnv1a64(name)), so "data", "shots", "init", "augment" and
// "batches" draws never interleave. Uniform and normal variates are produced
// from raw 64-bit engine output by fixed formulas (53-bit mantissa, Box-Muller)
// rather than std:: distributions, whose algorithms differ between standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // N(0, 1)
  std::size_t below(std::size_t n);      // uniform integer in [0, n)

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace mcl
