#include "splatscan/rng.hpp"

#include <cmath>

namespace splatscan {

double Rng::normal() {
    // Box-Muller, discarding the second variate.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t substream_seed(uint64_t root_seed, std::string_view name) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= uint64_t(uint8_t(c));
        h *= 0x100000001b3ULL;
    }
    // Mix the root seed in with one splitmix round so nearby seeds diverge.
    uint64_t z = root_seed + 0x9e3779b97f4a7c15ULL * (h | 1ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace splatscan
