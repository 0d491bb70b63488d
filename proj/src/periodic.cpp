#include "latticespin/periodic.hpp"

#include "latticespin/csv.hpp"
#include "latticespin/errors.hpp"
#include "latticespin/random.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace latticespin {

namespace {

double require_period(const SpinChainModel& model, const char* what) {
    if (!model.is_periodic()) throw UsageError(std::string(what) + ": the model has no period");
    return *model.period();
}

std::size_t period_steps(double T, double h, const char* what) {
    if (!(h > 0.0)) throw UsageError(std::string(what) + ": step must be positive");
    const double pd = T / h;
    const double p = std::round(pd);
    if (p < 1.0 || std::abs(pd - p) > 1e-9 * pd)
        throw UsageError(std::string(what) + ": the period is not a whole number of steps");
    return static_cast<std::size_t>(p);
}

/// Step index of the phase of s on a grid with P steps per period.
std::size_t phase_index(double s, double h, std::size_t P, const char* what) {
    if (!std::isfinite(s)) throw UsageError(std::string(what) + ": phase must be finite");
    const double j = s / h;
    const double jr = std::round(j);
    if (std::abs(j - jr) > 1e-9 * std::max(1.0, std::abs(j)))
        throw UsageError(std::string(what) + ": phase is not on the step grid");
    const auto p = static_cast<long long>(P);
    long long q = static_cast<long long>(jr) % p;
    if (q < 0) q += p;
    return static_cast<std::size_t>(q);
}

EmpiricalMeasure periodic_measure_on_stream(const SpinChainModel& model, double s, const PeriodicOptions& o,
                                            std::uint64_t stream, const char* what) {
    const double T = require_period(model, what);
    if (o.cycles == 0) throw UsageError(std::string(what) + ": cycles must be positive");
    const std::size_t P = period_steps(T, o.h, what);
    const std::size_t j = phase_index(s, o.h, P, what);
    const std::size_t n = model.volume();
    std::vector<double> x = o.x0.empty() ? std::vector<double>(n, 0.0) : o.x0;
    if (x.size() != n) throw UsageError(std::string(what) + ": initial state does not match the volume");

    const std::size_t first = j + o.burn_cycles * P;
    const std::size_t last = first + (o.cycles - 1) * P;
    std::vector<double> samples;
    samples.reserve(o.cycles * n);
    if (first == 0) samples.insert(samples.end(), x.begin(), x.end());

    const CoefficientSchedule schedule(model, o.h, 0.0);
    const StreamNoise noise{CounterRng(o.seed, stream), std::sqrt(o.h)};
    std::vector<double> work(n);
    const bool ok = integrate(model.drift(), schedule, o.scheme, noise, 0, last, x, work,
                              [&](std::size_t k, std::span<const double> st) {
                                  if (k >= first && (k - first) % P == 0) samples.insert(samples.end(), st.begin(), st.end());
                                  return true;
                              });
    if (!ok) throw EstimationError(std::string(what) + ": the path blew up; use the tamed scheme or a smaller step");
    const double phase = static_cast<double>(j) * o.h;
    Provenance prov{"periodic", model.hash(), o.seed, static_cast<double>(o.burn_cycles) * T, T, o.h, phase};
    return {n, std::move(samples), model.drift().constants().theta, prov};
}

} // namespace

LiftedTrajectory simulate_lifted(const SpinChainModel& model, std::span<const double> x0, double s0,
                                 const NoisePath& noise, Scheme scheme) {
    LiftedTrajectory out;
    out.period = require_period(model, "simulate_lifted");
    out.path = simulate(model, x0, noise, scheme, s0);
    const CoefficientSchedule schedule(model, noise.h, s0);
    out.phases.reserve(out.path.size());
    for (std::size_t k = 0; k < out.path.size(); ++k) out.phases.push_back(schedule.phase(k));
    return out;
}

std::string lifted_csv(const LiftedTrajectory& traj) {
    const std::size_t n = traj.path.volume;
    std::vector<std::string> header{"t", "phase"};
    for (std::size_t i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i));
    CsvBuilder csv(header);
    std::vector<double> row(n + 2);
    for (std::size_t k = 0; k < traj.path.size(); ++k) {
        row[0] = traj.path.times[k];
        row[1] = traj.phases[k];
        const auto s = traj.path.state(k);
        std::copy(s.begin(), s.end(), row.begin() + 2);
        csv.row(row);
    }
    return csv.str();
}

EmpiricalMeasure estimate_periodic_measure(const SpinChainModel& model, double s, const PeriodicOptions& options) {
    return periodic_measure_on_stream(model, s, options, 0, "estimate_periodic_measure");
}

std::vector<double> resample_histogram(const EmpiricalMeasure& mu, std::size_t count, std::uint64_t seed) {
    const std::size_t n = mu.volume();
    const std::size_t m = mu.sample_count();
    if (m == 0) throw UsageError("resample_histogram: empty measure");
    const auto bins = mu.binning();
    const CounterRng rng(seed, 0);
    std::vector<double> out(count * n);
    for (std::size_t r = 0; r < count; ++r) {
        const std::uint64_t base = static_cast<std::uint64_t>(r) * (n + 1);
        const auto k = std::min(m - 1, static_cast<std::size_t>(rng.uniform(base) * static_cast<double>(m)));
        const auto src = mu.sample(k);
        for (std::size_t i = 0; i < n; ++i) {
            const Binning& b = bins[i];
            const std::size_t j = b.index(src[i]);
            out[r * n + i] = b.edge(j) + b.width() * rng.uniform(base + 1 + i);
        }
    }
    return out;
}

TransportResult transport_check(const SpinChainModel& model, double s, double t, const EmpiricalMeasure& mu_s,
                                const EmpiricalMeasure& mu_t, std::size_t replicas, std::uint64_t seed,
                                const EnsembleOptions& options) {
    require_period(model, "transport_check");
    if (!(t >= s)) throw UsageError("transport_check: t must not precede s");
    if (replicas == 0) throw UsageError("transport_check: replicas must be positive");
    if (mu_s.volume() != model.volume() || mu_t.volume() != model.volume())
        throw UsageError("transport_check: measure volume does not match the model");
    if (mu_s.binning() != mu_t.binning()) throw UsageError("transport_check: mu_s and mu_t are binned differently");

    const auto initial = resample_histogram(mu_s, replicas, derive_seed(seed, 1));
    EnsembleOptions opts = options;
    opts.start_time = s;
    const std::vector<double> times{t - s};
    const auto snap = run_snapshots_from(model, initial, times, replicas, derive_seed(seed, 2), opts);
    Provenance prov{"transport", model.hash(), seed, s, 0.0, opts.h, t};
    const EmpiricalMeasure evolved(model.volume(), snap.finite_rows(0), mu_t.theta(), prov, mu_t.binning());
    if (evolved.sample_count() == 0) throw EstimationError("transport_check: every replica blew up");

    TransportResult res;
    res.replicas = evolved.sample_count();
    res.gap = tv_distance(evolved, mu_t);
    res.floor = noise_floor(evolved.sample_count(), mu_t.sample_count());
    res.null_bias = null_tv_bias(evolved, mu_t);
    return res;
}

std::vector<std::uint64_t> LiftedMeasure::phase_histogram() const { return joint.histogram(1).counts; }

LiftedMeasure average_lift(const SpinChainModel& model, std::size_t Q, const PeriodicOptions& options) {
    const double T = require_period(model, "average_lift");
    if (Q == 0) throw UsageError("average_lift: Q must be positive");
    const std::size_t P = period_steps(T, options.h, "average_lift");
    const std::size_t n = model.volume();

    std::vector<double> phases, joint, state;
    std::vector<EmpiricalMeasure> per_phase;
    for (std::size_t q = 0; q < Q; ++q) {
        // phases on the step grid, as close to q T / Q as the grid allows
        const auto j = static_cast<std::size_t>(std::llround(static_cast<double>(q * P) / static_cast<double>(Q)));
        const double phase = static_cast<double>(j) * options.h;
        phases.push_back(phase);
        per_phase.push_back(periodic_measure_on_stream(model, phase, options, q, "average_lift"));
        const auto& mu = per_phase.back();
        for (std::size_t k = 0; k < mu.sample_count(); ++k) {
            const auto x = mu.sample(k);
            joint.push_back(phase);
            joint.insert(joint.end(), x.begin(), x.end());
            state.insert(state.end(), x.begin(), x.end());
        }
    }

    const double w = T / static_cast<double>(Q);
    std::vector<Binning> jb(n + 1);
    jb[0] = Binning{-0.5 * w, T - 0.5 * w, Q};
    std::vector<const EmpiricalMeasure*> ptrs;
    for (const auto& mu : per_phase) ptrs.push_back(&mu);
    const auto sb = shared_binning(ptrs);
    std::copy(sb.begin(), sb.end(), jb.begin() + 1);

    const double theta = model.drift().constants().theta;
    Provenance prov{"average_lift", model.hash(), options.seed, static_cast<double>(options.burn_cycles) * T, T,
                    options.h, std::nullopt};
    EmpiricalMeasure joint_measure(n + 1, std::move(joint), theta, prov, jb);
    EmpiricalMeasure state_measure(n, std::move(state), theta, prov, sb);
    return {std::move(phases), std::move(per_phase), std::move(joint_measure), std::move(state_measure)};
}

std::string histogram_csv(const EmpiricalMeasure& mu, std::string_view comment) {
    CsvBuilder csv({"site", "lo", "hi", "count", "probability"}, comment);
    const double m = static_cast<double>(mu.sample_count());
    for (std::size_t i = 1; i <= mu.volume(); ++i) {
        const auto& h = mu.histogram(i);
        for (std::size_t j = 0; j < h.counts.size(); ++j)
            csv.row({static_cast<std::int64_t>(i), h.binning.edge(j), h.binning.edge(j + 1),
                     static_cast<std::int64_t>(h.counts[j]), m > 0.0 ? static_cast<double>(h.counts[j]) / m : 0.0});
    }
    return csv.str();
}

} // namespace latticespin
