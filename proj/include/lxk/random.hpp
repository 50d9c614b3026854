#ifndef LXK_RANDOM_HPP
#define LXK_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lxk {

/// The generator used everywhere in the toolkit.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Derives independent, reproducible substreams from one top-level seed.
 * `stream("kmeans")` always yields the same seed for the same parent, no
 * matter which other streams were requested before it.
 */
class SeedSequence {
public:
    explicit SeedSequence(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t stream(std::string_view name) const {
        // FNV-1a over the name, then mixed with the parent seed.
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : name) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return splitmix64(seed_ ^ splitmix64(h));
    }

    std::uint64_t stream(std::string_view name, std::uint64_t index) const {
        return splitmix64(stream(name) + splitmix64(index + 1));
    }

    SeedSequence child(std::string_view name) const { return SeedSequence(stream(name)); }

private:
    std::uint64_t seed_;
};

/// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection, identical on every platform.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % n;
}

/// Standard normal deviate (Box-Muller, one value per call).
inline double normal01(Rng& rng) {
    double u1 = 1.0 - uniform01(rng);
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fisher-Yates shuffle driven by `uniform_index`.
template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
    auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        auto j = static_cast<decltype(i)>(uniform_index(rng, static_cast<std::uint64_t>(i) + 1));
        using std::swap;
        swap(first[i], first[j]);
    }
}

}  // namespace lxk

#endif
