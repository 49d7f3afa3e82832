#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tgr {

// Deterministic RNG wrapper. std::mt19937_64 output is fully specified by the
// standard; the distribution helpers below avoid std::uniform_*_distribution,
// whose output is implementation-defined, so streams are reproducible across
// compilers and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // Unbiased integer in [0, n) via rejection sampling.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    // Integer in [lo, hi] inclusive.
    int64_t between(int64_t lo, int64_t hi) {
        if (hi <= lo) return lo;
        return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
    }

    // Double in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // In-place Fisher-Yates; std::shuffle is implementation-defined.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// 64-bit FNV-1a, optionally seeded. Used wherever a stable content hash is
// needed (token hashing, stream splitting); never std::hash, which varies
// across standard libraries.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0) {
    uint64_t h = 14695981039346656037ULL ^ seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// splitmix64 finalizer; decorrelates fnv output bits.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic unit-interval value derived from a key; independent of any
// RNG stream consumption order.
inline double unit_hash(std::string_view key, uint64_t seed) {
    return static_cast<double>(mix64(fnv1a64(key, seed)) >> 11) * 0x1.0p-53;
}

} // namespace tgr
