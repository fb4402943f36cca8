#pragma once

// Seeded random streams with platform-independent output.
//
// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so bounded integers and unit reals are derived here.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>

namespace daks {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Folds a root seed and a list of stream tags into one 64-bit seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) noexcept
{
    std::uint64_t h = splitmix64(root);
    for (auto tag : tags) {
        h = splitmix64(h ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
    }
    return h;
}

// Stream tags used across the library. Changing them changes every golden value.
namespace stream {
inline constexpr std::uint64_t processor = 0x70726f63;  // "proc"
inline constexpr std::uint64_t adversary = 0x61647672;  // "advr"
inline constexpr std::uint64_t truth = 0x74727468;      // "trth"
inline constexpr std::uint64_t profile = 0x70726f66;    // "prof"
inline constexpr std::uint64_t schedule = 0x73636864;   // "schd"
}  // namespace stream

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound)
    {
        if (bound == 0) {
            throw std::invalid_argument("Rng::below: bound must be positive");
        }
        std::uint64_t x = next();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                x = next();
                m = static_cast<unsigned __int128>(x) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform real in [0, 1) with 53 bits of resolution.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// True with probability p (p <= 0 never, p >= 1 always).
    bool bernoulli(double p) { return unit() < p; }

private:
    std::mt19937_64 engine_;
};

}  // namespace daks
