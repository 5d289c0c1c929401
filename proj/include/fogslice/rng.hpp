#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace fogslice {

// Engine output is fully specified by the standard; the helpers below avoid
// the implementation-defined std:: distributions so streams stay bit-identical
// across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a named sub-stream of a master seed ("environment", "agent.init", ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    return splitmix64(master ^ splitmix64(fnv1a(name)));
}

inline Rng make_rng(std::uint64_t master, std::string_view name) {
    return Rng{derive_seed(master, name)};
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), n > 0. Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

/// Inverse-CDF draw from a discrete distribution; returns an index into probs.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
    const double x = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (x < acc) return i;
    }
    // rounding: land on the last class with nonzero mass
    for (std::size_t i = probs.size(); i-- > 0;)
        if (probs[i] > 0.0) return i;
    return probs.size() - 1;
}

}  // namespace fogslice
