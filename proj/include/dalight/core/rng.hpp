#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string_view>

namespace dalight {

// 64-bit FNV-1a digest of a byte sequence. Used for proxy scanner buckets and
// per-parameter seed derivation; stable across platforms by construction.
inline uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= static_cast<uint64_t>(c);
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64 finalizer, decorrelates derived seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::string_view tag) {
    return mix64(seed ^ fnv1a64(tag));
}

// Deterministic random stream. The distributions are implemented here rather
// than with <random> adapters because the standard leaves those
// implementation-defined; mt19937_64 itself is fully specified.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1) with 53 mantissa bits
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n), rejection-sampled so there is no modulo bias
    int64_t uniform_int(int64_t n) {
        const uint64_t un = static_cast<uint64_t>(n);
        const uint64_t limit =
            std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % un;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return static_cast<int64_t>(v % un);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Box-Muller; the spare value is cached per stream.
    double normal() {
        if (spare_) {
            double v = *spare_;
            spare_.reset();
            return v;
        }
        constexpr double two_pi = 6.283185307179586476925286766559;
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(two_pi * u2);
        return r * std::cos(two_pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 gen_;
    std::optional<double> spare_;
};

}  // namespace dalight
