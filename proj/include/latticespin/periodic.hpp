#pragma once

#include "latticespin/ergodics.hpp"
#include "latticespin/kernels.hpp"
#include "latticespin/model.hpp"
#include "latticespin/sim.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latticespin {

/// Path of a periodic model together with its phase coordinate (s0 + t) mod T.
struct LiftedTrajectory {
    Trajectory path;
    std::vector<double> phases;
    double period = 0.0;
};

LiftedTrajectory simulate_lifted(const SpinChainModel& model, std::span<const double> x0, double s0,
                                 const NoisePath& noise, Scheme scheme = Scheme::euler);

/// CSV with header t,phase,x1,...,xn.
std::string lifted_csv(const LiftedTrajectory& traj);

struct PeriodicOptions {
    double h = 0.01;          // the period must be a whole number of steps
    Scheme scheme = Scheme::euler;
    std::size_t burn_cycles = 20;
    std::size_t cycles = 1000; // K
    std::uint64_t seed = 1;
    std::vector<double> x0;    // empty: the origin
};

/// Samples at times s + kT, k = burn_cycles .. burn_cycles + K - 1, along one path from time 0.
/// s is reduced to its phase in [0, T) on the step grid, so s and s + T give identical results.
EmpiricalMeasure estimate_periodic_measure(const SpinChainModel& model, double s, const PeriodicOptions& options);

struct TransportResult {
    double gap = 0.0;       // TV between the transported law and mu_t
    double floor = 0.0;     // 2 / sqrt(n_eff) for the two sample sizes
    double null_bias = 0.0; // expected TV of two independent samples of one law at these bins
    std::size_t replicas = 0;
};

/// Draws initial states from mu_s (a stored sample picked at random, each coordinate moved uniformly
/// within its histogram bin), evolves them from s to t, and compares with mu_t on mu_t's bins.
TransportResult transport_check(const SpinChainModel& model, double s, double t, const EmpiricalMeasure& mu_s,
                                const EmpiricalMeasure& mu_t, std::size_t replicas, std::uint64_t seed,
                                const EnsembleOptions& options = {});

/// Histogram-resampled states from mu (replica-major); exposed for testing.
std::vector<double> resample_histogram(const EmpiricalMeasure& mu, std::size_t count, std::uint64_t seed);

struct LiftedMeasure {
    std::vector<double> phases;          // q T / Q
    std::vector<EmpiricalMeasure> per_phase;
    EmpiricalMeasure joint;              // coordinate 1 is the phase, 2..n+1 the state
    EmpiricalMeasure state;              // state marginal of the mixture

    /// Counts of the phase coordinate in Q bins centred on the phases.
    std::vector<std::uint64_t> phase_histogram() const;
};

/// Uniform-phase mixture of per-phase estimates; phase q draws its path from stream q of the seed.
LiftedMeasure average_lift(const SpinChainModel& model, std::size_t Q, const PeriodicOptions& options);

/// Per-site histogram table: site,lo,hi,count,probability.
std::string histogram_csv(const EmpiricalMeasure& mu, std::string_view comment = {});

} // namespace latticespin
