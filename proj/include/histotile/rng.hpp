#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace histotile {

// SplitMix64 finalizer. Used to derive well-mixed stream seeds from a
// top-level seed plus a salt, and as the seeding function for Xorshift64Star.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Fixed derivation of per-stage / per-stream seeds from one top-level seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

// xorshift64* generator. Update equations:
//   s ^= s >> 12;  s ^= s << 25;  s ^= s >> 27;  output = s * 0x2545F4914F6CDD1D
// State is seeded through splitmix64 so any 64-bit seed (including 0) is valid.
// Integer-only state transitions make the stream bit-reproducible across
// platforms and languages.
class Xorshift64Star {
public:
    explicit Xorshift64Star(std::uint64_t seed) : state_(splitmix64(seed)) {
        if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
    }

    std::uint64_t next_u64() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    // Uniform in [0, n). Modulo reduction, documented as part of the stream
    // contract (bias is < 2^-32 for any n below 2^32).
    std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal deviate via Box-Muller (cosine branch only).
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by the xorshift64* stream; item order after the
// shuffle depends only on the seed and the input length.
template <typename T>
void shuffle(std::vector<T>& items, Xorshift64Star& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace histotile
