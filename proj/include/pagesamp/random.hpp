#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pagesamp {

using Rng = std::mt19937_64;

// The variate transforms below are spelled out instead of using <random>
// distributions so that streams are identical across standard libraries.

/// Engine seeded from (seed, stream) through std::seed_seq.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Uniform on [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound), unbiased by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// Standard normal by Box-Muller, cosine branch only (two engine outputs per variate).
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Exponential(1) by inversion.
inline double standard_exponential(Rng& rng) { return -std::log1p(-uniform01(rng)); }

}  // namespace pagesamp
