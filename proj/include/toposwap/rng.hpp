#pragma once

// Self-contained random number generation.
//
// Everything downstream (graph sampling, weights, noise, initial orders)
// draws from the generator defined here, never from <random>, so that a seed
// written into a manifest reproduces the same bytes on any platform and
// toolchain.  The generator is xoshiro256++ 1.0 (Blackman & Vigna), state
// seeded with splitmix64.  Substreams are derived by hashing (seed, stream
// index) through splitmix64; the scheme is spelled out in Rng::stream so
// third parties can re-derive any stream.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace toposwap {

namespace detail {

// splitmix64 single step: advances the state by the golden-ratio increment
// and returns a mixed output word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = detail::splitmix64(sm);
  }

  // Substream i of a base seed: state is seeded from
  // splitmix64(splitmix64(seed) xor splitmix64(i + 1)).  Streams for
  // distinct indices are independent for all practical purposes.
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t a = seed;
    std::uint64_t b = index + 1;
    std::uint64_t mixed = detail::splitmix64(a) ^ detail::splitmix64(b);
    return Rng(mixed);
  }

  // xoshiro256++ output function.
  std::uint64_t next_u64() {
    std::uint64_t result = detail::rotl(s_[0] + s_[3], 23) + s_[0];
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1): top 53 bits scaled by 2^-53.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection (OpenBSD bounded-rand scheme).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n < 2) return 0;
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; the pair's second value is cached so
  // consecutive calls consume one uniform pair per two normals.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    double u2 = uniform01();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    have_cached_ = true;
    return radius * std::cos(angle);
  }

  // Exponential(rate 1) by inversion.
  double exponential() {
    double u = 0.0;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return -std::log(u);
  }

  // Standard Gumbel (location 0, scale 1) by inversion.
  double gumbel() {
    double u = 0.0;
    do {
      u = uniform01();
    } while (u <= 0.0);
    return -std::log(-std::log(u));
  }

  // Fisher-Yates shuffle; with uniform_int above this is seed-portable.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t s_[4] = {};
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace toposwap
