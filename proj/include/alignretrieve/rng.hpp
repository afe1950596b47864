#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace alignretrieve {

// Stable 64-bit FNV-1a hash. Used for feature hashing and seed derivation so
// results are reproducible across platforms and standard library versions.
inline constexpr const char* kStableHashVersion = "fnv1a64/1";

std::uint64_t stable_hash64(const std::string& text);

// Derives an independent seed for a named stream from a master seed.
std::uint64_t seed_stream(std::uint64_t master_seed, const std::string& stream_name);

// Deterministic RNG with portable integer and floating-point mapping.
// std::mt19937_64 output is fully specified by the standard; the
// distributions are not, so sampling is done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Uniform integer in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi);

    // Uniform double in [0, 1).
    double unit();

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi);

private:
    std::mt19937_64 engine_;
};

}  // namespace alignretrieve
