#include "alignretrieve/rng.hpp"

namespace alignretrieve {

std::uint64_t stable_hash64(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t seed_stream(std::uint64_t master_seed, const std::string& stream_name) {
    std::uint64_t h = stable_hash64(stream_name);
    // Mix the master seed in with a splitmix64 round so nearby seeds diverge.
    std::uint64_t z = master_seed + 0x9e3779b97f4a7c15ULL + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
    std::uint64_t draw;
    do {
        draw = engine_();
    } while (draw >= limit);
    return draw % bound;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(below(span));
}

double Rng::unit() {
    // 53 random bits scaled to [0, 1), matching the usual double mantissa width.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * unit();
}

}  // namespace alignretrieve
