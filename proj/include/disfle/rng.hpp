#pragma once

#include <cstddef>
#include <cstdint>

namespace disfle {

/// splitmix64 step; also used as a 64-bit mixing function.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ 0x2545f4914f6cdd1dULL;
    splitmix64(s);
    s ^= b;
    return splitmix64(s);
}

/// Small deterministic RNG. Streams keyed by (seed, subject id) are
/// independent, so generation order never affects the data produced.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so small seeds do not produce correlated leading draws
        splitmix64(state_);
        splitmix64(state_);
    }
    Rng(std::uint64_t seed, std::uint64_t stream) : Rng(mix64(seed, stream)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // multiply-shift; bias is negligible for the n used here (days, ids)
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

private:
    std::uint64_t state_;
};

/// FNV-1a over a byte string; used for manifest/run-directory hashes.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace disfle
