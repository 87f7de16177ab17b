#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "mvc/errors.hpp"

// Deterministic, platform-stable random streams. Every random decision in the
// project flows through RngStream so that runs are reproducible bit-for-bit
// from (seed, stream label). The exact algorithms are part of the file-format
// and test contracts, so they are spelled out here rather than delegated to
// <random> (whose distributions are implementation-defined):
//
//   splitmix64(state): state += 0x9E3779B97F4A7C15; z = state;
//                      z = (z ^ z>>30) * 0xBF58476D1CE4E5B9;
//                      z = (z ^ z>>27) * 0x94D049BB133111EB; return z ^ z>>31.
//   xoshiro256++:      4-word state seeded with four successive splitmix64
//                      outputs; next() = rotl(s0+s3,23)+s0 with the standard
//                      xoshiro256 state transition.
//   below(n):          bitmask rejection. mask = smallest 2^k-1 >= n-1;
//                      draw next()&mask until the value is < n.
//   unit_double():     (next() >> 11) * 2^-53, uniform in [0,1).
//   normal():          Box-Muller; consumes exactly two raw draws per call:
//                      u1 in (0,1] from ((next()>>11)+1)*2^-53, u2 in [0,1);
//                      returns sqrt(-2 ln u1) * cos(2 pi u2). No caching.
//   derive(label):     sub-stream seed = splitmix_mix(seed ^ fnv1a64(label)),
//   derive(index):     sub-stream seed = splitmix_mix(seed ^ (index*GOLDEN+1)).

namespace mvc {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix_next(std::uint64_t& state) {
    state += kGolden;
    return splitmix_mix(state);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix_next(sm);
    }

    std::uint64_t seed() const { return seed_; }

    // Independent sub-stream for a named component, e.g. per class label.
    // Derivation acts on the originating seed, not on the evolving state.
    RngStream derive(std::string_view label) const {
        return RngStream(splitmix_mix(seed_ ^ fnv1a64(label)));
    }
    RngStream derive(std::uint64_t index) const {
        return RngStream(splitmix_mix(seed_ ^ (index * kGolden + 1)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Unbiased uniform draw from {0, 1, ..., n-1}.
    std::uint64_t below(std::uint64_t n) {
        require(n >= 1, ErrorKind::invalid_argument, "rng below(0)");
        if (n == 1) return 0;
        std::uint64_t mask = n - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        std::uint64_t v;
        do {
            v = next_u64() & mask;
        } while (v >= n);
        return v;
    }

    double unit_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0,1]
        const double u2 = unit_double();                                            // [0,1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

  private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4] = {};
    std::uint64_t seed_ = 0;
};

}  // namespace mvc
