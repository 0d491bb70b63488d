#include <doctest.h>

#include "latticespin/errors.hpp"
#include "latticespin/periodic.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace latticespin;

namespace {

LocalDrift linear(double slope) { return LocalDrift::linear(slope, DriftConstants{0.1, -slope, 1.0, std::abs(slope)}); }

// two-site chain with a periodically modulated subdiagonal, period 2
SpinChainModel modulated_pair() {
    return SpinChainModel(linear(-2.0), CouplingCoefficients::sinusoidal(0.375, 0.8667, 0.1, 0.0, 2.0), 2);
}

EmpiricalMeasure subset(const EmpiricalMeasure& mu, std::size_t parity, std::vector<Binning> bins) {
    std::vector<double> s;
    for (std::size_t k = parity; k < mu.sample_count(); k += 2) {
        const auto x = mu.sample(k);
        s.insert(s.end(), x.begin(), x.end());
    }
    return {mu.volume(), std::move(s), mu.theta(), mu.provenance(), std::move(bins)};
}

} // namespace

TEST_CASE("lifted path carries the phase") {
    const auto model = modulated_pair();
    const auto noise = make_noise(3, 0.01, 5.0);
    const std::vector<double> x0{0.3, -0.2};
    const double s0 = 0.7;
    const auto lifted = simulate_lifted(model, x0, s0, noise);
    REQUIRE(lifted.phases.size() == lifted.path.size());
    CHECK(lifted.period == 2.0);
    for (std::size_t k = 0; k < lifted.phases.size(); ++k) {
        const double expect = std::fmod(s0 + static_cast<double>(k) * 0.01, 2.0);
        CHECK(std::abs(lifted.phases[k] - expect) < 1e-12);
        CHECK(lifted.phases[k] >= 0.0);
        CHECK(lifted.phases[k] < 2.0);
    }
    const auto again = simulate_lifted(model, x0, s0 + 2.0, noise);
    CHECK(again.path.states == lifted.path.states);

    const auto csv = lifted_csv(lifted);
    CHECK(csv.rfind("t,phase,x1,x2\n", 0) == 0);

    const SpinChainModel flat(linear(-1.0), CouplingCoefficients::constant(0.5, 0.5), 2);
    CHECK_THROWS_AS(simulate_lifted(flat, x0, 0.0, noise), UsageError);
}

TEST_CASE("coefficients of the modulated pair") {
    const auto model = modulated_pair();
    const auto a = model.coefficients_at(0.5);
    CHECK(a.sub[1] == doctest::Approx(0.375 * (1.0 + 0.8667)));
    CHECK(a.super[0] == doctest::Approx(0.1));
    CHECK(model.coefficients_at(1.5).sub[1] == doctest::Approx(0.375 * (1.0 - 0.8667)));

    // super coupling 0.1 (1 + sin(2 pi t / T) / 2), T = 1, read back through the step schedule
    const SpinChainModel m(linear(-1.0), CouplingCoefficients::sinusoidal(0.3, 0.0, 0.1, 0.5, 1.0), 2);
    const CoefficientSchedule schedule(m, 0.125, 0.0);
    ChainCoefficients scratch;
    for (std::size_t k = 0; k < 5; ++k) {
        const double t = 0.125 * static_cast<double>(k);
        const double hand = 0.1 * (1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * t));
        CHECK(schedule.row(k, scratch).super[0] == doctest::Approx(hand).epsilon(1e-14));
        CHECK(schedule.phase(k) == t);
    }
}

TEST_CASE("a zero-amplitude period reproduces the homogeneous model") {
    const SpinChainModel flat(linear(-1.0), CouplingCoefficients::constant(0.5, 0.5), 3);
    const SpinChainModel degenerate(linear(-1.0), CouplingCoefficients::sinusoidal(0.5, 0.0, 0.5, 0.0, 1.0), 3);
    const auto noise = make_noise(11, 0.01, 4.0);
    const std::vector<double> x0{1.0, -0.5, 0.25};
    CHECK(simulate_lifted(degenerate, x0, 0.0, noise).path.states == simulate(flat, x0, noise).states);

    PeriodicOptions po;
    po.h = 0.01;
    po.burn_cycles = 20;
    po.cycles = 5000;
    po.seed = 5;
    const auto periodic = estimate_periodic_measure(degenerate, 0.0, po);
    InvariantOptions io;
    io.burn_in = 20.0;
    io.n_samples = 5000;
    io.thinning = 1.0;
    io.seed = 6;
    const auto invariant = estimate_invariant(flat, io);
    for (std::size_t i = 1; i <= 3; ++i) {
        const double se_mean = std::hypot(periodic.moment_se(i, 1), invariant.moment_se(i, 1));
        CHECK(std::abs(periodic.mean(i) - invariant.mean(i)) <= 3.0 * se_mean);
        const double se_var = std::hypot(periodic.variance_se(i), invariant.variance_se(i));
        CHECK(std::abs(periodic.variance(i) - invariant.variance(i)) <= 3.0 * se_var);
    }
}

TEST_CASE("periodic measure: phase reduction, split halves and phase dependence") {
    const auto model = modulated_pair();
    PeriodicOptions po;
    po.h = 0.01;
    po.burn_cycles = 10;
    po.cycles = 20000;
    po.seed = 17;
    const auto mu = estimate_periodic_measure(model, 0.5, po);
    CHECK(mu.sample_count() == 20000);
    REQUIRE(mu.provenance().phase.has_value());
    CHECK(*mu.provenance().phase == doctest::Approx(0.5));
    const auto shifted = estimate_periodic_measure(model, 2.5, po);
    CHECK(std::equal(mu.samples().begin(), mu.samples().end(), shifted.samples().begin(), shifted.samples().end()));
    CHECK_THROWS_AS(estimate_periodic_measure(model, 0.505, po), UsageError);
    PeriodicOptions off = po;
    off.h = 0.03;
    CHECK_THROWS_AS(estimate_periodic_measure(model, 0.0, off), UsageError);

    const auto bins = mu.binning();
    const auto even = subset(mu, 0, bins);
    const auto odd = subset(mu, 1, bins);
    const double split = tv_distance(even, odd);
    const double floor = std::max(noise_floor(even.sample_count(), odd.sample_count()), 2.0 * null_tv_bias(even, odd));
    MESSAGE("split-half tv " << split << " floor " << floor);
    CHECK(split < floor);

    const auto mu0 = estimate_periodic_measure(model, 0.0, po);
    const auto mu1 = estimate_periodic_measure(model, 1.0, po);
    const double gap = tv_distance_shared(mu0, mu1);
    MESSAGE("phase 0 vs 1 tv " << gap << " floor " << noise_floor(mu0.sample_count(), mu1.sample_count()));
    CHECK(gap > 3.0 * noise_floor(mu0.sample_count(), mu1.sample_count()));
}

TEST_CASE("histogram resampling stays in the source bins") {
    const auto model = modulated_pair();
    PeriodicOptions po;
    po.cycles = 4000;
    const auto mu = estimate_periodic_measure(model, 0.0, po);
    const auto draws = resample_histogram(mu, 20000, 9);
    REQUIRE(draws.size() == 40000);
    const auto bins = mu.binning();
    for (std::size_t r = 0; r < 20000; ++r)
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(draws[r * 2 + i] >= bins[i].lo);
            CHECK(draws[r * 2 + i] <= bins[i].hi);
        }
    const EmpiricalMeasure re(2, draws, mu.theta(), mu.provenance(), bins);
    CHECK(tv_distance(re, mu) < 2.0 * null_tv_bias(re, mu));
    CHECK(resample_histogram(mu, 50, 9) == std::vector<double>(draws.begin(), draws.begin() + 100));
}

TEST_CASE("transport between phases") {
    const auto model = modulated_pair();
    PeriodicOptions po;
    po.h = 0.01;
    po.burn_cycles = 10;
    po.cycles = 20000;
    po.seed = 23;
    const auto mu0 = estimate_periodic_measure(model, 0.0, po);
    const auto mu1 = estimate_periodic_measure(model, 1.0, po);
    std::vector<const EmpiricalMeasure*> both{&mu0, &mu1};
    const auto bins = shared_binning(both);
    const auto a = mu0.rebinned(bins);
    const auto b = mu1.rebinned(bins);
    EnsembleOptions eo;
    eo.h = 0.01;

    const auto same = transport_check(model, 0.0, 0.0, a, a, 20000, 4, eo);
    MESSAGE("t = s gap " << same.gap << " null bias " << same.null_bias << " floor " << same.floor);
    CHECK(same.gap < 2.0 * same.null_bias);

    const auto half = transport_check(model, 0.0, 1.0, a, b, 20000, 4, eo);
    MESSAGE("0 -> 1 gap " << half.gap << " floor " << half.floor);
    CHECK(half.gap < 2.0 * std::max(half.floor, half.null_bias));

    const auto full = transport_check(model, 0.0, 2.0, a, a, 20000, 4, eo);
    MESSAGE("0 -> 2 gap " << full.gap << " floor " << full.floor);
    CHECK(full.gap < 2.0 * std::max(full.floor, full.null_bias));

    CHECK_THROWS_AS(transport_check(model, 0.0, 1.0, mu0, mu1, 100, 4, eo), UsageError);
    CHECK_THROWS_AS(transport_check(SpinChainModel(linear(-1.0), CouplingCoefficients::constant(0.5, 0.5), 2), 0.0,
                                    1.0, a, b, 100, 4, eo),
                    UsageError);
    CHECK_THROWS_AS(transport_check(model, 1.0, 0.0, a, b, 100, 4, eo), UsageError);
}

TEST_CASE("degenerate period: transport over half a period and the lifted marginal") {
    const SpinChainModel flat(linear(-1.0), CouplingCoefficients::constant(0.5, 0.5), 2);
    const SpinChainModel degenerate(linear(-1.0), CouplingCoefficients::sinusoidal(0.5, 0.0, 0.5, 0.0, 2.0), 2);
    PeriodicOptions po;
    po.h = 0.01;
    po.burn_cycles = 10;
    po.cycles = 10000;
    po.seed = 31;
    const auto mu0 = estimate_periodic_measure(degenerate, 0.0, po);
    const auto mu1 = estimate_periodic_measure(degenerate, 1.0, po);
    std::vector<const EmpiricalMeasure*> both{&mu0, &mu1};
    const auto bins = shared_binning(both);
    EnsembleOptions eo;
    eo.h = 0.01;
    const auto res = transport_check(degenerate, 0.0, 1.0, mu0.rebinned(bins), mu1.rebinned(bins), 10000, 8, eo);
    CHECK(res.gap < 2.0 * std::max(res.floor, res.null_bias));

    po.cycles = 1000;
    const auto lift = average_lift(degenerate, 4, po);
    InvariantOptions io;
    io.burn_in = 20.0;
    io.n_samples = 4000;
    io.thinning = 2.0;
    io.seed = 32;
    const auto inv = estimate_invariant(flat, io);
    for (std::size_t i = 1; i <= 2; ++i) {
        const double se = std::hypot(lift.state.variance_se(i), inv.variance_se(i));
        CHECK(std::abs(lift.state.variance(i) - inv.variance(i)) <= 3.0 * se);
    }
}

TEST_CASE("average lift over phases") {
    const auto model = modulated_pair();
    PeriodicOptions po;
    po.h = 0.01;
    po.burn_cycles = 5;
    po.cycles = 500;
    po.seed = 29;

    const auto one = average_lift(model, 1, po);
    const auto direct = estimate_periodic_measure(model, 0.0, po);
    CHECK(std::equal(one.state.samples().begin(), one.state.samples().end(), direct.samples().begin(),
                     direct.samples().end()));

    const std::size_t Q = 8;
    const auto lift = average_lift(model, Q, po);
    REQUIRE(lift.phases.size() == Q);
    CHECK(lift.phases[2] == doctest::Approx(0.5));
    CHECK(lift.joint.volume() == 3);
    CHECK(lift.state.sample_count() == Q * 500);
    const auto counts = lift.phase_histogram();
    REQUIRE(counts.size() == Q);
    double chi2 = 0.0;
    const double expect = static_cast<double>(lift.state.sample_count()) / static_cast<double>(Q);
    for (auto c : counts) chi2 += (static_cast<double>(c) - expect) * (static_cast<double>(c) - expect) / expect;
    CHECK(chi2 < 18.475); // chi-square 7 dof, upper 1%
    // different phases draw different streams
    CHECK(lift.per_phase[0].sample(0)[0] != lift.per_phase[1].sample(0)[0]);
    CHECK_THROWS_AS(average_lift(model, 0, po), UsageError);
}

TEST_CASE("histogram table") {
    const EmpiricalMeasure mu(1, {0.1, 0.2, 0.9}, 1.0, Provenance{"test"}, {Binning{0.0, 1.0, 2}});
    const auto csv = histogram_csv(mu, "note");
    CHECK(csv == "# note\nsite,lo,hi,count,probability\n1,0,0.5,2,0.66666666666666663\n1,0.5,1,1,0.33333333333333331\n");
}
