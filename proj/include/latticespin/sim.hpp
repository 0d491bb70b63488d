#pragma once

#include "latticespin/model.hpp"
#include "latticespin/random.hpp"
#include "latticespin/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace latticespin {

enum class Scheme { euler, tamed };

/// Squared-norm threshold past which a state counts as blown up (norm > 1e12).
inline constexpr double kBlowupNormSquared = 1e24;

/// Number of steps of size h needed to cover horizon; exact multiples are not rounded up.
std::size_t step_count(double horizon, double h);

/// Brownian increments for site 1: increments[k] = sqrt(h) * N_k with N_k from stream `stream` of `seed`.
struct NoisePath {
    double h = 0.0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::vector<double> increments;
};

NoisePath make_noise(std::uint64_t seed, double h, double horizon, std::uint64_t stream = 0);

/// Uniform-grid path. states is step-major: states[k * volume + i] is x_{i+1}(times[k]).
struct Trajectory {
    std::vector<double> times;
    std::vector<double> states;
    std::size_t volume = 0;
    bool blowup = false;

    std::size_t size() const { return times.size(); }
    std::span<const double> state(std::size_t k) const { return {states.data() + k * volume, volume}; }
    std::span<const double> final_state() const { return state(size() - 1); }
};

/**
 * Coupling rows and drift times along the step grid t_k = start + k h.
 *
 * For periodic models whose period is an integer number of steps, one period of
 * rows is tabulated and the time fed to the coefficients is the canonical phase
 * in [0, T), so starting at s and at s + T gives bitwise identical steps.
 */
class CoefficientSchedule {
public:
    CoefficientSchedule(const SpinChainModel& model, double h, double start_time);

    /// Coupling row for step k; `scratch` is filled only when rows are not tabulated.
    const ChainCoefficients& row(std::size_t k, ChainCoefficients& scratch) const;
    /// Time argument passed to the coefficients at step k.
    double time(std::size_t k) const;
    /// Canonical phase of step k in [0, T); requires a periodic model.
    double phase(std::size_t k) const;

    double h() const { return h_; }

private:
    const SpinChainModel* model_;
    double h_;
    double start_;
    std::optional<double> period_;
    std::vector<ChainCoefficients> rows_;
    std::size_t period_steps_ = 0; // 0: not tabulated
    std::size_t phase_index0_ = 0;
    double phase0_ = 0.0;          // canonical start phase when tabulated off-grid
    bool grid_aligned_ = false;
};

/// Noise from a materialized path.
struct PathNoise {
    std::span<const double> increments;
    void fill(std::size_t first, std::span<double> out) const {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = increments[first + j];
    }
};

/// Noise generated on the fly; identical values to make_noise with the same (seed, stream).
struct StreamNoise {
    CounterRng rng;
    double sqrt_h;
    void fill(std::size_t first, std::span<double> out) const { rng.fill_normal(first, out, sqrt_h); }
};

/// One explicit step in place. `d` is scratch of the same length. Returns false on blowup.
inline bool advance_state(const LocalDrift& f, const ChainCoefficients& a, double t, double h, double dw,
                          Scheme scheme, std::span<double> x, std::span<double> d) {
    drift_into(f, a, t, x, d);
    double scale = h;
    if (scheme == Scheme::tamed) {
        double nd = 0.0;
        for (double v : d) nd += v * v;
        scale = h / (1.0 + h * std::sqrt(nd));
    }
    double norm2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] += scale * d[i];
        norm2 += x[i] * x[i];
    }
    x[0] += dw;
    norm2 += dw * (2.0 * x[0] - dw);
    return std::isfinite(norm2) && norm2 <= kBlowupNormSquared;
}

/**
 * Integrates `steps` steps starting at global step index `first_step` (noise index and
 * schedule position). After every step k -> k+1 calls observe(k + 1, x); observe may
 * return false to stop early. Returns false when the state blew up.
 */
template <class Noise, class Observer>
bool integrate(const LocalDrift& f, const CoefficientSchedule& schedule, Scheme scheme, const Noise& noise,
               std::size_t first_step, std::size_t steps, std::span<double> x, std::span<double> work,
               Observer&& observe) {
    constexpr std::size_t kChunk = 64;
    double dw[kChunk];
    ChainCoefficients scratch;
    const double h = schedule.h();
    std::size_t done = 0;
    while (done < steps) {
        const std::size_t len = std::min(kChunk, steps - done);
        noise.fill(first_step + done, std::span<double>(dw, len));
        for (std::size_t j = 0; j < len; ++j) {
            const std::size_t k = first_step + done + j;
            const auto& a = schedule.row(k, scratch);
            if (!advance_state(f, a, schedule.time(k), h, dw[j], scheme, x, work)) return false;
            if (!observe(k + 1, std::span<const double>(x.data(), x.size()))) return true;
        }
        done += len;
    }
    return true;
}

/// Euler-Maruyama (or tamed) path over the whole noise horizon, starting at start_time.
Trajectory simulate(const SpinChainModel& model, std::span<const double> x0, const NoisePath& noise,
                    Scheme scheme = Scheme::euler, double start_time = 0.0);

/// Synchronously coupled volumes n != m started from project(x, n) and project(x, m).
std::pair<Trajectory, Trajectory> simulate_pair_volumes(const SpinChainModel& model, std::size_t n, std::size_t m,
                                                        const PaddedSequence& x, const NoisePath& noise,
                                                        double horizon, Scheme scheme = Scheme::euler);

/// Same model and noise from two initial states.
std::pair<Trajectory, Trajectory> simulate_pair_initials(const SpinChainModel& model, std::span<const double> x,
                                                         std::span<const double> y, const NoisePath& noise,
                                                         double horizon, Scheme scheme = Scheme::euler);

/// CSV with header t,x1,...,xn.
std::string trajectory_csv(const Trajectory& traj);

} // namespace latticespin
