#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mi_embed {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to turn (base seed, stream index) into
// decorrelated generator seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(mix64(base) ^ (stream * 0xd6e8feb86659fd93ULL));
}

// FNV-1a; stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named sub-streams so that independent stages of one pipeline never share draws.
namespace streams {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kVictim = 3;
inline constexpr std::uint64_t kShadow = 4;
inline constexpr std::uint64_t kAttack = 5;
inline constexpr std::uint64_t kFeatures = 6;
inline constexpr std::uint64_t kBaseline = 7;
}  // namespace streams

}  // namespace mi_embed
