#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mrv {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic seed for the substream identified by `keys` under `seed`.
/// Keys are folded in order, so (seed, 3, 7) and (seed, 7, 3) differ.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (auto k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return make_rng(derive_seed(seed, keys));
}

}  // namespace mrv
