#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace qsum {

// SplitMix64. State advances by a fixed Weyl increment; each output is a
// finalizer of the counter. Chosen over <random> engines because the
// standard distributions are implementation-defined, and experiment
// replay must be bit-identical across toolchains.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0,n), n >= 1, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (max % n + 1) % n;  // 2^64 mod n
    std::uint64_t x = next();
    while (rem != 0 && x > max - rem) x = next();
    return x % n;
  }

  // Standard normal via Box-Muller. Two uniforms per call, no cached
  // spare: replaying a stream never depends on call parity.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0,1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

// Stable derivation of a child stream: trial/solver substreams must not
// shift when an unrelated run is added or removed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  SplitMix64 g(master ^ (0x9E3779B97F4A7C15ull * (index + 1)));
  return g.next();
}

}  // namespace qsum
