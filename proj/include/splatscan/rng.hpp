// Deterministic seeded RNG. All randomness in the project flows through this
// generator so results are reproducible across platforms and standard-library
// versions (std:: distributions are implementation-defined).
#pragma once

#include <cstdint>
#include <string_view>

namespace splatscan {

// splitmix64 core; good enough statistical quality for scene synthesis and
// view sampling, and fully portable.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be >= 1.
    uint64_t uniform_int(uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (no spare caching, so the draw count per
    // call is fixed and state stays reproducible).
    double normal();

private:
    uint64_t state_;
};

// FNV-1a over the stream name, mixed with the root seed. Named substreams let
// scene generation, initialization, the optimizer and policies draw from one
// root seed without interfering with each other.
uint64_t substream_seed(uint64_t root_seed, std::string_view name);

inline Rng substream(uint64_t root_seed, std::string_view name) {
    return Rng(substream_seed(root_seed, name));
}

}  // namespace splatscan
