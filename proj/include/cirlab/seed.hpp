#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cirlab {

/// 64-bit FNV-1a. Stable across platforms and standard libraries.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for a named substream ("pairing", "init", "shuffle", ...)
/// so each consumer of randomness stays deterministic on its own.
constexpr std::uint64_t substream_seed(std::uint64_t root, std::string_view name) noexcept {
  return splitmix64(root ^ splitmix64(fnv1a64(name)));
}

inline std::mt19937_64 substream(std::uint64_t root, std::string_view name) {
  return std::mt19937_64(substream_seed(root, name));
}

}  // namespace cirlab
