#pragma once

// Deterministic, splittable pseudo-random stream.
//
// The generator is SplitMix64 (Steele et al., "Fast splittable pseudorandom
// number generators"): pure 64-bit integer arithmetic, so the draw sequence
// for a given seed is identical on every platform. split(tag) derives an
// independent stream by running the current state and the tag through the
// SplitMix64 finalizer, so substreams never alias the parent sequence.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace voxsam {

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller transform; one transcendental pair per draw.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  RngStream split(std::uint64_t tag) const {
    std::uint64_t z = state_ + 0x9E3779B97F4A7C15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return RngStream(z ^ (z >> 31));
  }

 private:
  std::uint64_t state_;
};

}  // namespace voxsam
