#pragma once

#include <cstdint>
#include <vector>

#include "qt/errors.hpp"

namespace qt {

// Counter-based pseudo-random generator (splitmix64, Steele et al. 2014).
// The state walks a Weyl sequence and each output is a finalizer of the
// counter, so the draw sequence is a pure function of the seed and is
// bit-identical on every platform and in every language that reproduces
// the three shift/multiply rounds below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double next_u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw ValueError("uniform: requires lo < hi");
    return lo + (hi - lo) * next_u01();
  }

  // Uniform index in [0, n). Modulo bias is negligible for n << 2^64 and the
  // rule is trivial to reproduce elsewhere.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw ValueError("next_below: n must be positive");
    return next_u64() % n;
  }

  // Fisher-Yates, descending index order.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace qt
