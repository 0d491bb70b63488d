#include <doctest.h>

#include "latticespin/errors.hpp"
#include "latticespin/lyapunov.hpp"
#include "latticespin/random.hpp"

#include <cmath>
#include <vector>

using namespace latticespin;

namespace {

SpinChainModel linear_chain(std::size_t n, double a, double slope, DriftConstants c) {
    return {LocalDrift::linear(slope, c), CouplingCoefficients::constant(a, a), n};
}

/// grad V . b + (1/2) d^2 V / dx_1^2 by Richardson-extrapolated central differences.
double fd_generator(const SpinChainModel& m, const LyapunovSpec& spec, std::vector<double> x) {
    const auto b = drift_vector(m, 0.0, x);
    auto shifted = [&](double e, const std::vector<double>& dir) {
        auto y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += e * dir[i];
        return spec.value(y);
    };
    std::vector<double> e1(x.size(), 0.0);
    e1[0] = 1.0;
    auto first = [&](double e) { return (shifted(e, b) - shifted(-e, b)) / (2.0 * e); };
    auto second = [&](double e) { return (shifted(e, e1) - 2.0 * spec.value(x) + shifted(-e, e1)) / (e * e); };
    const double e = 1e-3;
    const double d1 = (4.0 * first(e / 2) - first(e)) / 3.0;
    const double d2 = (4.0 * second(e / 2) - second(e)) / 3.0;
    return d1 + 0.5 * d2;
}

} // namespace

TEST_CASE("generator_apply: hand-evaluated cases") {
    const auto m1 = linear_chain(3, 0.1, -1.0, {});
    CHECK(generator_apply(m1, LyapunovSpec::unit(), 0.0, std::vector<double>{0, 0, 0}) == 1.0);

    const auto m2 = linear_chain(2, 0.1, -1.0, {});
    CHECK(generator_apply(m2, LyapunovSpec::unit(), 0.0, std::vector<double>{1, 1}) == doctest::Approx(-2.6).epsilon(1e-14));

    CHECK_THROWS_AS(generator_apply(m2, LyapunovSpec::unit(), 0.0, std::vector<double>{1, 1, 1}), UsageError);
    CHECK_THROWS_AS(generator_apply(m2, LyapunovSpec::custom({1, 2, 3}), 0.0, std::vector<double>{1, 1}), UsageError);
    CHECK_THROWS_AS(LyapunovSpec::unit(0.5), UsageError);
}

TEST_CASE("generator_apply agrees with a finite-difference generator") {
    const DriftConstants c{1.0, 1.0, 1.0, 2.0};
    const std::vector<SpinChainModel> models{
        linear_chain(4, 0.2, -1.0, c),
        {LocalDrift::cubic(1.0, 1.0, c), CouplingCoefficients::constant(0.2, 0.3), 4},
        {LocalDrift::tanh_saturated(1.0, 0.5, c), CouplingCoefficients::table({0.1, 0.2, 0.3}, {0.3, 0.2, 0.1}), 4},
    };
    const std::vector<LyapunovSpec> specs{LyapunovSpec::unit(), LyapunovSpec::unit(2.0),
                                          LyapunovSpec::custom({1.0, 0.5, 0.25, 0.125}, 1.5),
                                          LyapunovSpec::weighted(SiteWeight::exponential(std::log(2.0)), 4)};
    const CounterRng rng(77, 0);
    std::uint64_t idx = 0;
    for (const auto& m : models)
        for (const auto& spec : specs)
            for (int k = 0; k < 100; ++k) {
                std::vector<double> x(4);
                rng.fill_normal(idx, x);
                idx += 4;
                const double exact = generator_apply(m, spec, 0.0, x);
                const double fd = fd_generator(m, spec, x);
                INFO(spec.label() << " theta " << spec.theta);
                CHECK(std::abs(exact - fd) <= 1e-6 * (1.0 + std::abs(exact)));
            }
}

TEST_CASE("generator_apply is linear in the weights") {
    const auto m = linear_chain(3, 0.3, -2.0, {});
    const std::vector<double> w1{1.0, 2.0, 0.5}, w2{0.25, 3.0, 1.5}, sum{1.25, 5.0, 2.0};
    const CounterRng rng(5, 0);
    for (std::uint64_t k = 0; k < 50; ++k) {
        std::vector<double> x(3);
        rng.fill_normal(3 * k, x, 3.0);
        for (double th : {1.0, 2.0}) {
            const double a = generator_apply(m, LyapunovSpec::custom(w1, th, 0.0), 0.0, x);
            const double b = generator_apply(m, LyapunovSpec::custom(w2, th, 0.0), 0.0, x);
            const double s = generator_apply(m, LyapunovSpec::custom(sum, th, 0.0), 0.0, x);
            CHECK(s == doctest::Approx(a + b).epsilon(1e-13));
        }
    }
}

TEST_CASE("lyapunov_samples") {
    LyapunovSampling s;
    s.count = 2000;
    s.radius = 50.0;
    const auto x = lyapunov_samples(3, s);
    CHECK(x.size() == 6000);
    CHECK(x[0] == 0.0);
    double largest = 0.0;
    for (std::size_t k = 0; k < 2000; ++k) {
        const double r = std::hypot(x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        CHECK(r <= 50.0 * (1 + 1e-12));
        largest = std::max(largest, r);
    }
    CHECK(largest > 45.0);
    CHECK(lyapunov_samples(3, s) == x);
}

TEST_CASE("drift_condition_check with closed-form constants") {
    for (std::size_t n : {2u, 4u, 8u}) {
        const auto m = linear_chain(n, 0.2, -1.0, {0.1, 1.0, 1.0, 1.0});
        const auto spec = LyapunovSpec::unit();
        const auto k = auto_constants(m, spec);
        REQUIRE(k.constants);
        CHECK(k.constants->C == doctest::Approx(2.0 * n * 0.1 + 2.0));
        const auto ok = drift_condition_check(m, spec, k.constants->c, k.constants->C);
        CHECK(ok.pass);
        CHECK(ok.samples == 10000);
        const auto bad = drift_condition_check(m, spec, 1e6, k.constants->C);
        CHECK_FALSE(bad.pass);
        CHECK(std::isfinite(bad.max_violation));
        for (double v : bad.witness) CHECK(std::isfinite(v));
        CHECK(bad.to_json().find("\"pass\":false") != std::string::npos);
    }
    CHECK_THROWS_AS(drift_condition_check(linear_chain(2, 0.1, -1.0, {}), LyapunovSpec::unit(), 0.0, 1.0), UsageError);
}

TEST_CASE("drift_condition_check with a summable weight") {
    const SiteWeight v = SiteWeight::exponential(std::log(2.0));
    const auto m = linear_chain(8, 0.1, -3.0, {0.5, 3.0, 1.0, 3.0});
    const auto spec = LyapunovSpec::weighted(v, 8);
    const auto k = auto_constants(m, spec);
    REQUIRE(k.constants);
    CHECK(k.constants->C == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(drift_condition_check(m, spec, k.constants->c, k.constants->C).pass);
}

TEST_CASE("auto_constants") {
    const auto m3 = linear_chain(3, 0.1, -1.0, {0.5, 1.0, 1.0, 1.0});
    const auto unit = auto_constants(m3, LyapunovSpec::unit());
    REQUIRE(unit.constants);
    CHECK(unit.constants->c == 1.0);
    CHECK(unit.constants->C == 5.0);

    const auto w = auto_constants(m3, LyapunovSpec::weighted(SiteWeight::exponential(std::log(2.0)), 3));
    REQUIRE(w.constants);
    CHECK(w.constants->c == 1.0);
    CHECK(w.constants->C == doctest::Approx(1.0).epsilon(1e-12));

    const auto exotic = auto_constants(m3, LyapunovSpec::custom({1.0, 7.0, 0.1}));
    CHECK_FALSE(exotic.constants);
    CHECK_FALSE(exotic.reason.empty());
    CHECK_FALSE(auto_constants(m3, LyapunovSpec::unit(2.0)).constants);
}
