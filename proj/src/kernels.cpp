#include "latticespin/kernels.hpp"

#include "latticespin/errors.hpp"

#include <cmath>
#include <limits>
#include <omp.h>

namespace latticespin {

int available_threads() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
    if (threads < 1) throw UsageError("thread count must be positive");
    omp_set_num_threads(threads);
}

std::vector<double> EnsembleSnapshots::finite_rows(std::size_t ti) const {
    std::vector<double> out;
    out.reserve(replicas * volume);
    for (std::size_t r = 0; r < replicas; ++r) {
        const auto s = at(ti, r);
        bool ok = true;
        for (double v : s) ok = ok && std::isfinite(v);
        if (ok) out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::size_t grid_index(double t, double h) {
    if (t < 0.0) throw UsageError("snapshot times must be nonnegative");
    const double q = t / h;
    const double r = std::round(q);
    if (std::abs(q - r) > 1e-9 * std::max(1.0, q))
        throw UsageError("time " + std::to_string(t) + " is not a multiple of the step " + std::to_string(h));
    return static_cast<std::size_t>(r);
}

EnsembleSnapshots run_snapshots_from(const SpinChainModel& model, std::span<const double> initial,
                                     std::span<const double> times, std::size_t replicas, std::uint64_t seed,
                                     const EnsembleOptions& options) {
    const std::size_t n = model.volume();
    if (replicas == 0) throw UsageError("replica count must be positive");
    if (initial.size() != replicas * n) throw UsageError("initial states do not match replicas x volume");
    if (times.empty()) throw UsageError("no snapshot times");
    std::vector<std::size_t> idx;
    for (double t : times) idx.push_back(grid_index(t, options.h));
    for (std::size_t j = 1; j < idx.size(); ++j)
        if (idx[j] < idx[j - 1]) throw UsageError("snapshot times must be ascending");

    EnsembleSnapshots out;
    out.volume = n;
    out.replicas = replicas;
    out.times.assign(times.begin(), times.end());
    out.values.assign(times.size() * replicas * n, std::numeric_limits<double>::quiet_NaN());
    out.blowup.assign(replicas, 0);

    const CoefficientSchedule schedule(model, options.h, options.start_time);
    const double sqrt_h = std::sqrt(options.h) * options.noise_scale;
    const auto& f = model.drift();

    for_each_replica(replicas, options.backend, [&](std::size_t r) {
        std::vector<double> x(initial.begin() + static_cast<std::ptrdiff_t>(r * n),
                              initial.begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
        std::vector<double> work(n);
        const StreamNoise noise{CounterRng(seed, options.first_stream + r), sqrt_h};
        std::size_t step = 0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            if (idx[j] > step) {
                if (!integrate(f, schedule, options.scheme, noise, step, idx[j] - step, x, work,
                               [](std::size_t, std::span<const double>) { return true; })) {
                    out.blowup[r] = 1;
                    return;
                }
                step = idx[j];
            }
            std::copy(x.begin(), x.end(), out.values.begin() + static_cast<std::ptrdiff_t>((j * replicas + r) * n));
        }
    });
    for (auto b : out.blowup) out.blowups += b;
    return out;
}

EnsembleSnapshots run_snapshots(const SpinChainModel& model, std::span<const double> x0, std::span<const double> times,
                                std::size_t replicas, std::uint64_t seed, const EnsembleOptions& options) {
    if (x0.size() != model.volume()) throw UsageError("initial state does not match the model volume");
    std::vector<double> initial(replicas * x0.size());
    for (std::size_t r = 0; r < replicas; ++r) std::copy(x0.begin(), x0.end(), initial.begin() + static_cast<std::ptrdiff_t>(r * x0.size()));
    return run_snapshots_from(model, initial, times, replicas, seed, options);
}

} // namespace latticespin
