#include <doctest.h>

#include "latticespin/random.hpp"

#include <cmath>
#include <vector>

using namespace latticespin;

TEST_CASE("philox4x32-10 known-answer vectors") {
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("draws are pure functions of seed, stream and index") {
    const CounterRng a(42, 7), b(42, 7), c(43, 7), d(42, 8);
    for (std::uint64_t i = 0; i < 100; ++i) {
        CHECK(a.normal(i) == b.normal(i));
        CHECK(a.normal(i) != c.normal(i));
        CHECK(a.normal(i) != d.normal(i));
    }
}

TEST_CASE("fill_normal matches elementwise draws at any offset") {
    const CounterRng rng(5, 0);
    for (std::uint64_t first : {0ull, 1ull, 6ull, 13ull}) {
        std::vector<double> out(9);
        rng.fill_normal(first, out, 0.5);
        for (std::size_t j = 0; j < out.size(); ++j) CHECK(out[j] == rng.normal(first + j) * 0.5);
    }
}

TEST_CASE("uniforms lie in the open unit interval and have mean 1/2") {
    const CounterRng rng(1, 2);
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform(static_cast<std::uint64_t>(i));
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        s += u;
    }
    // standard error of the mean is sqrt(1/12 / n)
    CHECK(std::abs(s / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST_CASE("derived seeds differ by purpose") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(9, 3) == derive_seed(9, 3));
}
