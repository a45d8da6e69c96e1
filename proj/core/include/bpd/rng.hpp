#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace bpd {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream of a parent seed.
/// All randomness in a run flows from one global seed through these streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform double in [0, 1) built from the top 53 bits; portable across
/// standard library implementations.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng);

/// Samples an index from an (unnormalized, non-negative) weight vector.
int sample_categorical(std::span<const double> weights, Rng& rng);

}  // namespace bpd
