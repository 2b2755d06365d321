#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace locfuse {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable seed derived from a base seed and a list of integer labels.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t h = mix64(base);
  for (auto v : labels) h = mix64(h ^ mix64(v));
  return h;
}

// Stream labels. Keeping them in one place avoids accidental reuse.
namespace stream {
inline constexpr std::uint64_t layout = 1;
inline constexpr std::uint64_t trajectory = 2;
inline constexpr std::uint64_t anchor_prior = 3;
inline constexpr std::uint64_t measurement = 4;
inline constexpr std::uint64_t sweep_cell = 5;
inline constexpr std::uint64_t bench = 6;
}  // namespace stream

}  // namespace locfuse
