#pragma once

// Random streams.
//
// Every stochastic step draws from std::mt19937_64 seeded with a 64-bit value
// derived by SplitMix64 finalisation. A child stream for key k of parent seed s
// is seeded with splitmix64(s ^ splitmix64(k)); chains of keys fold left.
// Uniforms are the top 53 bits of one engine output scaled by 2^-53, so draws
// are bit-identical across standard libraries.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace driftdr {

inline constexpr const char* kRngDescription =
    "mt19937_64 seeded by splitmix64 stream derivation: child(s,k)=splitmix64(s^splitmix64(k))";

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) {
    return splitmix64(parent ^ splitmix64(key));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> keys) {
    for (std::uint64_t k : keys) parent = derive_seed(parent, k);
    return parent;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0,1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) {
        // rejection removes modulo bias
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

template <class Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace driftdr
