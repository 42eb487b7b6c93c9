#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>

#include "mfrisk/errors.hpp"

namespace mfrisk {

// Philox 4x32-10 block cipher (Salmon et al., SC 2011).
// Counter-based: the value at any (key, counter) position is computable
// without generating the positions before it, so independent streams can
// be handed to parallel workers without coordination.
namespace philox {

constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;

inline std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                          std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

}  // namespace philox

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed for a named stage, so different stages of one run never share a
// draw sequence even when they use the same stream ids.
inline std::uint64_t substream_seed(std::uint64_t master_seed, std::string_view stage) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a 64
    for (const char c : stage) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return splitmix64(master_seed ^ h);
}

/// Deterministic RNG over (seed, stream): the draw sequence depends only on
/// those two values and the number of draws taken, never on other streams.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : stream_(stream) {
        const std::uint64_t k = splitmix64(seed);
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    }

    std::uint64_t next_u64() {
        if (pos_ >= 4) refill();
        const std::uint64_t lo = buf_[pos_];
        const std::uint64_t hi = buf_[pos_ + 1];
        pos_ += 2;
        return (hi << 32) | lo;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n).
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw input_error("uniform_below: n must be positive");
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal draw (Box-Muller; pairs are cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() {
        buf_ = philox::block({static_cast<std::uint32_t>(block_),
                              static_cast<std::uint32_t>(block_ >> 32),
                              static_cast<std::uint32_t>(stream_),
                              static_cast<std::uint32_t>(stream_ >> 32)},
                             key_);
        ++block_;
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t stream_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mfrisk
