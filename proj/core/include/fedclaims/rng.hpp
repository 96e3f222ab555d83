#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <vector>

#include "fedclaims/error.hpp"

// Deterministic randomness for the whole engine.
//
// Every stochastic step (weight init, data generation, shuffles) draws from
// xoshiro256** seeded through splitmix64, so a (seed, draw order) pair yields
// bit-identical streams on any IEEE-754 platform. Nothing here touches
// std::random_device or the libstdc++ distributions, whose outputs are not
// portable across standard library implementations.

namespace fedclaims {

/// splitmix64 step (Vigna). Used for state expansion and seed derivation.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Domain-separated seed derivation: child = mix(parent, tag).
/// Tags are small integers naming the consumer (see SeedDomain in config.hpp).
constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t s = seed ^ (tag * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL);
  return splitmix64(s);
}

constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) noexcept {
  return seed_mix(seed_mix(seed, a), b);
}

constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b, std::uint64_t c) noexcept {
  return seed_mix(seed_mix(seed, a, b), c);
}

/// xoshiro256** 1.0 (Blackman & Vigna, public domain reference algorithm).
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1): top 53 bits scaled by 2^-53.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1); safe input for log().
  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 12) + 0.5) * 0x1.0p-52;
  }

  /// Standard normal via Box-Muller (cosine branch; two words per draw).
  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Gamma(shape, scale) by the Marsaglia-Tsang squeeze method, implemented
  /// in-repo so draws are identical across platforms for a given seed.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0)) {
      fail(ErrorKind::Config, "gamma: shape and scale must be positive");
    }
    if (shape < 1.0) {
      // Boost by one and rescale: Gamma(k) = Gamma(k+1) * U^(1/k).
      const double g = gamma(shape + 1.0, scale);
      return g * std::pow(uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v * scale;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  /// Poisson(lambda) by counting unit-exponential interarrivals. O(lambda)
  /// per draw; callers clamp lambda (datagen caps it at 1e3).
  std::uint32_t poisson(double lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      fail(ErrorKind::Config, "poisson: lambda must be finite and nonnegative");
    }
    double acc = 0.0;
    std::uint32_t n = 0;
    for (;;) {
      acc += -std::log(uniform_open());
      if (acc > lambda) return n;
      ++n;
    }
  }

  /// Unbiased integer in [0, n) (Lemire multiply-shift with rejection).
  std::uint64_t bounded(std::uint64_t n) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

/// Identity permutation of size n, shuffled under the given seed.
inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Xoshiro256 rng(seed);
  rng.shuffle(idx);
  return idx;
}

/// FNV-1a 64-bit over raw bytes; the canonical checksum for logs and batches.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xCBF29CE484222325ULL) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Order-sensitive hash of doubles via their IEEE-754 bit patterns (LE bytes).
inline std::uint64_t hash_doubles(std::span<const double> values) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    h = fnv1a64(bytes, 8, h);
  }
  return h;
}

/// Order-sensitive hash of 64-bit ids (LE bytes); used for batch alignment
/// checksums so entity ids themselves never cross a channel.
inline std::uint64_t hash_u64s(std::span<const std::uint64_t> values) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint64_t v : values) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    h = fnv1a64(bytes, 8, h);
  }
  return h;
}

}  // namespace fedclaims
