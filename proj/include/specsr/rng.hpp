#pragma once

#include <cstdint>
#include <random>

namespace specsr {

// Deterministic draws on top of mt19937_64. The distributions are spelled
// out here instead of <random>'s because libstdc++ does not pin their bit
// streams; checkpoints and split files must reproduce bit-for-bit.

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [-bound, bound).
inline double uniform_sym(std::mt19937_64& rng, double bound) {
    return (2.0 * uniform01(rng) - 1.0) * bound;
}

/// Uniform integer in [0, n). Multiply-shift reduction; the modulo bias is
/// below 2^-32 for any n that fits an image or patch-pool index.
inline std::uint64_t bounded_uint(std::mt19937_64& rng, std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

/// Mixes a base seed with a stream index (splitmix64 finalizer). Used to
/// give every training iteration an independent, resume-stable substream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace specsr
