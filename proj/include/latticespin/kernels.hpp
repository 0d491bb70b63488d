#pragma once

// Replica-parallel ensemble kernels. Every replica r draws its noise from
// stream r of the ensemble seed, so results do not depend on the backend or
// on the number of threads.

#include "latticespin/model.hpp"
#include "latticespin/sim.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace latticespin {

enum class Backend { serial, openmp };

/// Runs fn(r) for r in [0, count). The serial backend is the reference implementation.
template <class Fn>
void for_each_replica(std::size_t count, Backend backend, Fn&& fn) {
    if (backend == Backend::openmp) {
        const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 16)
        for (long long r = 0; r < n; ++r) fn(static_cast<std::size_t>(r));
    } else {
        for (std::size_t r = 0; r < count; ++r) fn(r);
    }
}

int available_threads();
void set_thread_count(int threads);

struct EnsembleOptions {
    double h = 0.01;
    Scheme scheme = Scheme::euler;
    Backend backend = Backend::openmp;
    double start_time = 0.0;
    std::uint64_t first_stream = 0; // replica r uses stream first_stream + r
    double noise_scale = 1.0;       // 0 gives the noise-free dynamics
};

/// States of every replica at the requested times (relative to start_time, ascending, >= 0).
/// values[(t * replicas + r) * volume + i]; a blown-up replica holds NaN from its blowup on.
struct EnsembleSnapshots {
    std::size_t volume = 0;
    std::size_t replicas = 0;
    std::vector<double> times;
    std::vector<double> values;
    std::vector<unsigned char> blowup;
    std::size_t blowups = 0;

    std::span<const double> at(std::size_t ti, std::size_t r) const {
        return {values.data() + (ti * replicas + r) * volume, volume};
    }
    /// Finite states at time index ti, replica-major (blown-up replicas skipped).
    std::vector<double> finite_rows(std::size_t ti) const;
};

/// Step index of offset t on the grid of size h; t must be a multiple of h up to 1e-9 relative.
std::size_t grid_index(double t, double h);

/// Every replica starts from x0.
EnsembleSnapshots run_snapshots(const SpinChainModel& model, std::span<const double> x0, std::span<const double> times,
                                std::size_t replicas, std::uint64_t seed, const EnsembleOptions& options);

/// Replica r starts from initial[r * volume .. (r+1) * volume).
EnsembleSnapshots run_snapshots_from(const SpinChainModel& model, std::span<const double> initial,
                                     std::span<const double> times, std::size_t replicas, std::uint64_t seed,
                                     const EnsembleOptions& options);

} // namespace latticespin
