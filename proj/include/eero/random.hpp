#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace eero {

// Counter-based randomness: every draw is a pure function of its key, so
// results never depend on iteration or thread scheduling order.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

/// Uniform on [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double keyed_uniform(std::initializer_list<std::uint64_t> key) noexcept { return to_unit(hash_key(key)); }

/// Standard normal via Box-Muller on two keyed uniforms.
inline double keyed_normal(std::uint64_t key) noexcept {
  const double u1 = 1.0 - to_unit(splitmix64(key ^ 0x1ULL));  // (0, 1]
  const double u2 = to_unit(splitmix64(key ^ 0x2ULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Keys for the three dataset splits; instance keys of different splits never collide.
enum class Split : std::uint64_t { Train = 0, Calib = 1, Test = 2 };

constexpr std::uint64_t instance_key(Split split, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(split) << 48) + index;
}

}  // namespace eero
