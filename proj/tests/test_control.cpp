#include <doctest.h>

#include "latticespin/control.hpp"
#include "latticespin/errors.hpp"
#include "latticespin/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace latticespin;

namespace {

const DriftConstants kConstants{1.0, 1.0, 1.0, 2.0};

SpinChainModel cubic_chain(std::size_t n, double a = 1.0) {
    return {LocalDrift::cubic(1.0, 1.0, kConstants), CouplingCoefficients::constant(a, a), n};
}

/// Uncontrolled chain by RK4 with a fixed step, forward or backward in time.
std::vector<double> rk4_free(const SpinChainModel& m, std::vector<double> y, double t, double h) {
    const std::size_t steps = static_cast<std::size_t>(std::llround(std::abs(t) / h));
    const double dt = t / static_cast<double>(steps);
    auto f = [&](const std::vector<double>& s) { return drift_vector(m, 0.0, s); };
    for (std::size_t k = 0; k < steps; ++k) {
        const auto k1 = f(y);
        auto tmp = y;
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
        const auto k2 = f(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
        const auto k3 = f(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + dt * k3[i];
        const auto k4 = f(tmp);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return y;
}

/// Largest chain-equation residual of the plan at time t, including the controlled first site,
/// relative to the largest term of its equation.
double chain_residual(const ControlPlan& plan, double t) {
    const auto& m = plan.model();
    const auto a = m.coefficients_at(0.0);
    const auto p = plan.at(t);
    const std::size_t n = m.volume();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fi = m.drift()(0.0, p.y[i][0]);
        const double lower = i > 0 ? a.sub[i] * p.y[i - 1][0] : 0.0;
        const double upper = i + 1 < n ? a.super[i] * p.y[i + 1][0] : 0.0;
        const double control = i == 0 ? p.u : 0.0;
        const double scale = std::max({1.0, std::abs(p.y[i][1]), std::abs(fi), std::abs(lower), std::abs(upper), std::abs(control)});
        worst = std::max(worst, std::abs(p.y[i][1] - (fi + lower + upper + control)) / scale);
    }
    return worst;
}

} // namespace

TEST_CASE("endpoint_jets: closed forms") {
    const double a12 = 0.3, a21 = 0.5, a23 = 0.4, a32 = -0.7;
    const SpinChainModel m3(LocalDrift::cubic(1.0, 1.0, kConstants), CouplingCoefficients::table({a21, a32}, {a12, a23}), 3);
    const std::vector<double> x{0.4, -1.1, 0.6}, z{0.1, 0.2, 0.3};
    const auto jets = endpoint_jets(m3, x, z, 2.0);
    auto f = [](double v) { return v - v * v * v; };
    auto fp = [](double v) { return 1.0 - 3.0 * v * v; };
    CHECK(jets.at_start[0] == x[2]);
    CHECK(jets.at_end[0] == z[2]);
    CHECK(jets.at_start[1] == doctest::Approx(a32 * x[1] + f(x[2])));
    const double second = a32 * (a21 * x[0] + a23 * x[2] + f(x[1])) + fp(x[2]) * (a32 * x[1] + f(x[2]));
    CHECK(jets.at_start[2] == doctest::Approx(second));

    const SpinChainModel zero(LocalDrift::linear(0.0, kConstants), CouplingCoefficients::constant(0.7, 0.2), 2);
    const auto j2 = endpoint_jets(zero, std::vector<double>{1.5, 2.0}, std::vector<double>{0.0, 0.0}, 1.0);
    CHECK(j2.at_start[1] == 0.7 * 1.5);

    const auto free = chain_taylor(m3, x, 2);
    CHECK(std::isnan(free[0][1]));
    CHECK(std::isfinite(free[2][2]));

    CHECK_THROWS_AS(endpoint_jets(m3, x, z, 0.0), UsageError);
    CHECK_THROWS_AS(endpoint_jets(m3, std::vector<double>{1.0}, z, 1.0), UsageError);
}

TEST_CASE("endpoint_jets against finite differences of the free trajectory") {
    const SpinChainModel m(LocalDrift::cubic(1.0, 1.0, kConstants), CouplingCoefficients::table({0.8, -0.6, 0.9}, {0.5, 0.3, 0.7}), 4);
    const std::vector<double> x{0.3, -0.5, 0.8, 0.2};
    const auto jets = endpoint_jets(m, x, x, 1.0);
    const double h = 0.01;
    double y[7];
    for (int k = -3; k <= 3; ++k) y[k + 3] = k == 0 ? x[3] : rk4_free(m, x, k * h, 1e-4)[3];
    // central differences of fourth order
    const double d1 = (y[1] - 8.0 * y[2] + 8.0 * y[4] - y[5]) / (12.0 * h);
    const double d2 = (-y[1] + 16.0 * y[2] - 30.0 * y[3] + 16.0 * y[4] - y[5]) / (12.0 * h * h);
    const double d3 = (-y[6] + 8.0 * y[5] - 13.0 * y[4] + 13.0 * y[2] - 8.0 * y[1] + y[0]) / (8.0 * h * h * h);
    CHECK(jets.at_start[0] == x[3]);
    CHECK(std::abs(jets.at_start[1] - d1) < 1e-4);
    CHECK(std::abs(jets.at_start[2] - d2) < 1e-4);
    CHECK(std::abs(jets.at_start[3] - d3) < 1e-4);
}

TEST_CASE("hermite_interpolant") {
    const std::vector<double> c0{2.5, 0.0, 0.0}, c1{2.5, 0.0, 0.0};
    const auto constant = hermite_interpolant(c0, c1, 3.0);
    for (double t : {0.0, 0.7, 1.9, 3.0}) CHECK(constant(t) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(constant.degree() == 5);

    const CounterRng rng(8, 0);
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::vector<double> s(3), e(3);
        rng.fill_normal(6 * trial, s);
        rng.fill_normal(6 * trial + 3, e);
        const double T = 0.5 + static_cast<double>(trial) * 0.2;
        const auto p = hermite_interpolant(s, e, T);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(std::abs(p.derivative(0.0, j) - s[j]) <= 1e-10 * std::max(1.0, std::abs(s[j])));
            CHECK(std::abs(p.derivative(T, j) - e[j]) <= 1e-10 * std::max(1.0, std::abs(e[j])));
        }
        // solve on [0, 1] and compose with t / T
        std::vector<double> su(3), eu(3);
        for (std::size_t j = 0; j < 3; ++j) {
            su[j] = s[j] * std::pow(T, static_cast<double>(j));
            eu[j] = e[j] * std::pow(T, static_cast<double>(j));
        }
        const auto q = hermite_interpolant(su, eu, 1.0);
        for (double t : {0.1 * T, 0.5 * T, 0.9 * T}) CHECK(std::abs(q(t / T) - p(t)) <= 1e-9 * std::max(1.0, std::abs(p(t))));
    }

    const std::vector<double> s5{1, 0, 0, 0, 0}, e5{0, 0, 0, 0, 0};
    const auto wide = hermite_interpolant(s5, e5, 1000.0);
    CHECK(wide.scale() == 1000.0);
    CHECK(wide(0.0) == doctest::Approx(1.0));
    CHECK(std::abs(wide(1000.0)) < 1e-9);

    const std::vector<double> many(20, 1.0);
    CHECK_THROWS_AS(hermite_interpolant(many, many, 1.0), NumericalError);
    CHECK_THROWS_AS(hermite_interpolant(s5, e5, 0.0), UsageError);
    CHECK_THROWS_AS(hermite_interpolant(s5, std::vector<double>{1.0}, 1.0), UsageError);
}

TEST_CASE("back_substitute: single site") {
    const SpinChainModel m(LocalDrift::cubic(1.0, 1.0, kConstants), CouplingCoefficients::constant(0.0, 0.0), 1);
    const std::vector<double> x{0.5}, z{-0.25};
    const auto plan = plan_steering(m, x, z, 1.5, 64);
    for (std::size_t k = 0; k < plan.grid().size(); k += 7) {
        const double t = plan.grid()[k];
        const double y = plan.interpolant()(t);
        CHECK(plan.control()[k] == doctest::Approx(plan.interpolant().derivative(t, 1) - (y - y * y * y)));
    }
}

TEST_CASE("back_substitute: linear n = 3 against the hand expansion") {
    const double c = -0.8, a12 = 0.3, a21 = 0.5, a23 = 0.4, a32 = -0.7;
    const SpinChainModel m(LocalDrift::linear(c, kConstants), CouplingCoefficients::table({a21, a32}, {a12, a23}), 3);
    const std::vector<double> x{1.0, 0.0, -1.0}, z{0.0, 1.0, 0.0};
    const auto plan = plan_steering(m, x, z, 2.0);
    const auto& p = plan.interpolant();
    for (int k = 0; k < 10; ++k) {
        const double t = 0.2 * k + 0.05;
        const double d0 = p(t), d1 = p.derivative(t, 1), d2 = p.derivative(t, 2), d3 = p.derivative(t, 3);
        const double y2 = (d1 - c * d0) / a32;
        const double y2p = (d2 - c * d1) / a32;
        const double y2pp = (d3 - c * d2) / a32;
        const double y1 = (y2p - a23 * d0 - c * y2) / a21;
        const double y1p = (y2pp - a23 * d1 - c * y2p) / a21;
        const double u = y1p - a12 * y2 - c * y1;
        const auto q = plan.at(t);
        CHECK(std::abs(q.y[1][0] - y2) <= 1e-10 * std::max(1.0, std::abs(y2)));
        CHECK(std::abs(q.y[0][0] - y1) <= 1e-10 * std::max(1.0, std::abs(y1)));
        CHECK(std::abs(q.u - u) <= 1e-10 * std::max(1.0, std::abs(u)));
    }
}

TEST_CASE("plan invariants: endpoints and chain residual") {
    std::vector<SpinChainModel> models;
    for (std::size_t n : {2u, 3u, 4u}) models.push_back(cubic_chain(n, 0.8));
    models.emplace_back(LocalDrift::linear(-1.0, kConstants), CouplingCoefficients::table({0.5, -0.7, 0.9, 0.6}, {0.3, 0.4, -0.2, 0.5}), 5);
    for (const auto& m : models) {
        const std::size_t n = m.volume();
        std::vector<double> x(n), z(n);
        CounterRng(n, 0).fill_normal(0, x, 0.5);
        CounterRng(n, 1).fill_normal(0, z, 0.5);
        const auto plan = plan_steering(m, x, z, 2.0);
        const auto p0 = plan.at(0.0), pT = plan.at(2.0);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(p0.y[i][0] - x[i]) <= 1e-8);
            CHECK(std::abs(pT.y[i][0] - z[i]) <= 1e-8);
        }
        for (int k = 0; k <= 1000; ++k) CHECK(chain_residual(plan, 2.0 * k / 1000.0) <= 1e-8);
    }
    const auto m = cubic_chain(3);
    const auto z = m.with_coupling(m.coupling().with_zeroed_sub(3));
    const std::vector<double> x{1, 0, -1};
    CHECK_THROWS_AS(plan_steering(z, x, x, 1.0), StructuralError);
    CHECK_THROWS_AS(back_substitute(m, hermite_interpolant(endpoint_jets(m, x, x, 1.0), 1.0), std::vector<double>{0, 1}), UsageError);
}

TEST_CASE("verify_steering") {
    const auto m = cubic_chain(3);
    const std::vector<double> origin(3, 0.0);
    const auto rest = plan_steering(m, origin, origin, 2.0);
    CHECK(verify_steering(m, origin, origin, 2.0, rest, 1e-3) <= 1e-10);

    const std::vector<double> x{1.0, 0.0, -1.0}, z{0.0, 1.0, 0.0};
    const auto plan = plan_steering(m, x, z, 2.0);
    CHECK(verify_steering(m, x, z, 2.0, plan, 1e-4) <= 1e-6);

    // fourth order at steps where the integration error dominates the interpolation floor
    const double e1 = verify_steering(m, x, z, 2.0, plan, 0.04);
    const double e2 = verify_steering(m, x, z, 2.0, plan, 0.02);
    CHECK(e1 / e2 >= 8.0);

    const SpinChainModel lin(LocalDrift::linear(-1.0, kConstants), CouplingCoefficients::constant(0.0, 0.0), 1);
    const std::vector<double> x1{2.0}, z1{-1.0};
    CHECK(verify_steering(lin, x1, z1, 1.0, plan_steering(lin, x1, z1, 1.0), 1e-3) <= 1e-9);

    CHECK_THROWS_AS(verify_steering(m, x, z, 3.0, plan, 1e-3), UsageError);
    CHECK_THROWS_AS(verify_steering(m, x, z, 2.0, plan, 0.0), UsageError);
}

TEST_CASE("plan CSV") {
    const auto m = cubic_chain(2);
    const std::vector<double> x{1.0, 0.0}, z{0.0, 1.0};
    const auto plan = plan_steering(m, x, z, 1.0, 16);
    const auto csv = plan.to_csv();
    CHECK(csv.rfind("t,u,y1,y2\n0,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 17);
}
