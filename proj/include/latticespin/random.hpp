#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (seed, stream, index), so replica r at step k produces the same value no
// matter which thread computes it or in which order.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace latticespin {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u;
    constexpr std::uint32_t M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u;
    constexpr std::uint32_t W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{M0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{M1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// SplitMix64 finalizer; used to derive child seeds for independent purposes.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ mix64(tag + 0x632BE59BD9B4E019ull));
}

/// Uniform and Gaussian draws addressed by (seed, stream, index).
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::array<std::uint32_t, 4> block(std::uint64_t index) const {
        return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                           static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                          {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    }

    /// Two uniforms in the open interval (0,1) with 53-bit resolution.
    std::array<double, 2> uniform_pair(std::uint64_t block_index) const {
        const auto b = block(block_index);
        const std::uint64_t a = (std::uint64_t{b[1]} << 32) | b[0];
        const std::uint64_t c = (std::uint64_t{b[3]} << 32) | b[2];
        return {to_open_unit(a), to_open_unit(c)};
    }

    double uniform(std::uint64_t index) const { return uniform_pair(index >> 1)[index & 1u]; }

    /// Box-Muller pair from one Philox block.
    std::array<double, 2> normal_pair(std::uint64_t block_index) const {
        const auto [u1, u2] = uniform_pair(block_index);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    double normal(std::uint64_t index) const { return normal_pair(index >> 1)[index & 1u]; }

    /// Fills out[j] = normal(first + j) * scale, generating pairs where possible.
    void fill_normal(std::uint64_t first, std::span<double> out, double scale = 1.0) const {
        std::size_t j = 0;
        std::uint64_t idx = first;
        if ((idx & 1u) != 0 && j < out.size()) {
            out[j++] = normal(idx++) * scale;
        }
        for (; j + 1 < out.size(); j += 2, idx += 2) {
            const auto z = normal_pair(idx >> 1);
            out[j] = z[0] * scale;
            out[j + 1] = z[1] * scale;
        }
        if (j < out.size()) {
            out[j] = normal(idx) * scale;
        }
    }

private:
    static double to_open_unit(std::uint64_t bits) {
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
};

} // namespace latticespin
