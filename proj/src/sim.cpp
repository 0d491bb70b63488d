#include "latticespin/sim.hpp"

#include "latticespin/csv.hpp"
#include "latticespin/errors.hpp"

#include <cmath>

namespace latticespin {

std::size_t step_count(double horizon, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw UsageError("step size must be positive and finite");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw UsageError("horizon must be positive and finite");
    const double q = horizon / h;
    const double r = std::round(q);
    if (std::abs(q - r) <= 1e-9 * std::max(1.0, q)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(q));
}

NoisePath make_noise(std::uint64_t seed, double h, double horizon, std::uint64_t stream) {
    NoisePath p;
    p.h = h;
    p.horizon = horizon;
    p.seed = seed;
    p.stream = stream;
    p.increments.resize(step_count(horizon, h));
    CounterRng(seed, stream).fill_normal(0, p.increments, std::sqrt(h));
    return p;
}

CoefficientSchedule::CoefficientSchedule(const SpinChainModel& model, double h, double start_time)
    : model_(&model), h_(h), start_(start_time), period_(model.period()) {
    if (!(h > 0.0)) throw UsageError("step size must be positive");
    if (!period_) {
        rows_.push_back(model.coefficients_at(start_time));
        return;
    }
    const double T = *period_;
    phase0_ = start_time - T * std::floor(start_time / T);
    if (phase0_ >= T) phase0_ -= T;
    const double pd = T / h;
    const double p = std::round(pd);
    if (p < 1.0 || std::abs(pd - p) > 1e-9 * pd) return;
    period_steps_ = static_cast<std::size_t>(p);
    const double j = phase0_ / h;
    const double jr = std::round(j);
    grid_aligned_ = std::abs(j - jr) <= 1e-9 * std::max(1.0, j);
    rows_.reserve(period_steps_);
    if (grid_aligned_) {
        phase_index0_ = static_cast<std::size_t>(jr) % period_steps_;
        for (std::size_t q = 0; q < period_steps_; ++q)
            rows_.push_back(model.coefficients_at(static_cast<double>(q) * h));
    } else {
        for (std::size_t q = 0; q < period_steps_; ++q)
            rows_.push_back(model.coefficients_at(phase0_ + static_cast<double>(q) * h));
    }
}

const ChainCoefficients& CoefficientSchedule::row(std::size_t k, ChainCoefficients& scratch) const {
    if (!period_) return rows_.front();
    if (period_steps_ > 0) {
        if (grid_aligned_) return rows_[(phase_index0_ + k) % period_steps_];
        return rows_[k % period_steps_];
    }
    scratch = model_->coefficients_at(time(k));
    return scratch;
}

double CoefficientSchedule::time(std::size_t k) const {
    if (!period_) return start_ + static_cast<double>(k) * h_;
    if (period_steps_ > 0) {
        if (grid_aligned_) return static_cast<double>((phase_index0_ + k) % period_steps_) * h_;
        return phase0_ + static_cast<double>(k % period_steps_) * h_;
    }
    return std::fmod(phase0_ + static_cast<double>(k) * h_, *period_);
}

double CoefficientSchedule::phase(std::size_t k) const {
    if (!period_) throw UsageError("phase requested for a model without a period");
    return time(k);
}

Trajectory simulate(const SpinChainModel& model, std::span<const double> x0, const NoisePath& noise, Scheme scheme,
                    double start_time) {
    const std::size_t n = model.volume();
    if (x0.size() != n)
        throw UsageError("simulate: initial state has " + std::to_string(x0.size()) + " entries, volume is " +
                         std::to_string(n));
    const std::size_t steps = noise.increments.size();
    if (steps == 0) throw UsageError("simulate: empty noise path");
    const CoefficientSchedule schedule(model, noise.h, start_time);

    Trajectory traj;
    traj.volume = n;
    traj.times.reserve(steps + 1);
    traj.states.reserve((steps + 1) * n);
    traj.times.push_back(start_time);
    traj.states.insert(traj.states.end(), x0.begin(), x0.end());

    std::vector<double> x(x0.begin(), x0.end()), work(n);
    const bool ok = integrate(model.drift(), schedule, scheme, PathNoise{noise.increments}, 0, steps, x, work,
                              [&](std::size_t k, std::span<const double> s) {
                                  traj.times.push_back(start_time + static_cast<double>(k) * noise.h);
                                  traj.states.insert(traj.states.end(), s.begin(), s.end());
                                  return true;
                              });
    traj.blowup = !ok;
    return traj;
}

namespace {

NoisePath covering(const NoisePath& noise, double horizon) {
    const std::size_t steps = step_count(horizon, noise.h);
    if (steps > noise.increments.size()) throw UsageError("noise path does not cover the requested horizon");
    NoisePath p = noise;
    p.horizon = horizon;
    p.increments.resize(steps);
    return p;
}

} // namespace

std::pair<Trajectory, Trajectory> simulate_pair_volumes(const SpinChainModel& model, std::size_t n, std::size_t m,
                                                        const PaddedSequence& x, const NoisePath& noise,
                                                        double horizon, Scheme scheme) {
    if (n == m) throw UsageError("simulate_pair_volumes: volumes must differ");
    if (n == 0 || m == 0) throw UsageError("simulate_pair_volumes: volumes must be positive");
    const NoisePath p = covering(noise, horizon);
    return {simulate(model.with_volume(n), project(x, n), p, scheme),
            simulate(model.with_volume(m), project(x, m), p, scheme)};
}

std::pair<Trajectory, Trajectory> simulate_pair_initials(const SpinChainModel& model, std::span<const double> x,
                                                         std::span<const double> y, const NoisePath& noise,
                                                         double horizon, Scheme scheme) {
    if (x.size() != model.volume() || y.size() != model.volume())
        throw UsageError("simulate_pair_initials: initial states must match the model volume");
    const NoisePath p = covering(noise, horizon);
    return {simulate(model, x, p, scheme), simulate(model, y, p, scheme)};
}

std::string trajectory_csv(const Trajectory& traj) {
    std::vector<std::string> header{"t"};
    for (std::size_t i = 1; i <= traj.volume; ++i) header.push_back("x" + std::to_string(i));
    CsvBuilder csv(header);
    std::vector<double> row(traj.volume + 1);
    for (std::size_t k = 0; k < traj.size(); ++k) {
        row[0] = traj.times[k];
        const auto s = traj.state(k);
        std::copy(s.begin(), s.end(), row.begin() + 1);
        csv.row(row);
    }
    return csv.str();
}

} // namespace latticespin
