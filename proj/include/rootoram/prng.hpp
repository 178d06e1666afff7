#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>

namespace rootoram {

// Deterministic randomness source. Every protocol draw goes through this
// wrapper so that a seed fully determines a run; the helpers below avoid
// std::* distributions, whose output sequences are implementation-defined.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform over [0, bound), bound > 0. Rejection sampling, no modulo bias.
  std::uint64_t uniform(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double prob) { return uniform_double() < prob; }

  // Inverse-transform sampling; fine for the small rates used here.
  std::uint64_t poisson(double mean) {
    const double u = uniform_double();
    double term = std::exp(-mean);
    double cumulative = term;
    std::uint64_t count = 0;
    while (u > cumulative) {
      ++count;
      term *= mean / static_cast<double>(count);
      cumulative += term;
      if (term <= 0.0) break;  // underflow guard on extreme tails
    }
    return count;
  }

  void fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
      const std::uint64_t word = engine_();
      const std::size_t n = std::min<std::size_t>(8, out.size() - i);
      std::memcpy(out.data() + i, &word, n);
      i += n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rootoram
