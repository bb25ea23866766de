#pragma once

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, index), so results do not depend on thread scheduling.

#include <cmath>
#include <cstdint>
#include <limits>

#include "constants.hpp"

namespace phonoq {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t counter_hash(std::uint64_t key, std::uint64_t ctr) {
  // Two rounds of the splitmix finalizer over a keyed Weyl sequence.
  return mix64(mix64(key + 0x9e3779b97f4a7c15ULL * (ctr + 1)) ^ (key >> 1 | 1));
}

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed * 0xd1342543de82ef95ULL + mix64(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return counter_hash(key_, ctr_++); }

  // Uniform on (0, 1): 53 random bits, never exactly 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }
  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  std::uint64_t counter() const { return ctr_; }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace phonoq
