#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace iad {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one draw, so the
// sequence is identical across standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n); n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return i < n ? i : n - 1;
}

// Standard normal via Box-Muller on uniform01; deterministic for a seed.
double standard_normal(Rng& rng);

// Derives an independent stream seed from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace iad
