#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace scanpath {

/// All stochastic code draws from a 64-bit Mersenne Twister. Its output
/// sequence is fixed by the C++ standard, and every transformation of raw
/// draws goes through Boost.Random or code in this project, so a seed
/// reproduces the same artifacts on any platform.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer applied to (base, stream); used to derive
/// independent per-reader / per-line seeds from one user seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);

/// Uniform integer in [lo, hi].
int uniform_int(Rng& rng, int lo, int hi);

double sample_normal(Rng& rng, double mean = 0.0, double stddev = 1.0);

/// Gamma variate with the given shape and scale.
double sample_gamma(Rng& rng, double shape, double scale);

/// Index drawn with probability proportional to weights (must sum > 0).
std::size_t sample_discrete(Rng& rng, std::span<const double> weights);

}  // namespace scanpath
