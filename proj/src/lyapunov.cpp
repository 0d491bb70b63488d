#include "latticespin/lyapunov.hpp"

#include "latticespin/errors.hpp"
#include "latticespin/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <json.hpp>

namespace latticespin {

LyapunovSpec LyapunovSpec::unit(double theta) {
    if (!(theta >= 1.0)) throw UsageError("Lyapunov exponent requires theta >= 1");
    LyapunovSpec s;
    s.theta = theta;
    return s;
}

LyapunovSpec LyapunovSpec::weighted(const SiteWeight& v, std::size_t sites, double theta) {
    if (!(theta >= 1.0)) throw UsageError("Lyapunov exponent requires theta >= 1");
    if (!v.summable()) throw UsageError("Lyapunov weight must be summable");
    LyapunovSpec s;
    s.shape = Shape::weighted;
    s.theta = theta;
    s.offset = 0.0;
    s.weight_total = v.total();
    for (std::size_t i = 1; i <= sites; ++i) s.weights.push_back(v(i));
    return s;
}

LyapunovSpec LyapunovSpec::custom(std::vector<double> weights, double theta, double offset) {
    if (!(theta >= 1.0)) throw UsageError("Lyapunov exponent requires theta >= 1");
    for (double w : weights)
        if (!(w > 0.0) || !std::isfinite(w)) throw UsageError("Lyapunov weights must be positive and finite");
    LyapunovSpec s;
    s.shape = Shape::custom;
    s.weights = std::move(weights);
    s.theta = theta;
    s.offset = offset;
    return s;
}

double LyapunovSpec::value(std::span<const double> x) const {
    double v = offset;
    for (std::size_t i = 0; i < x.size(); ++i) v += weight(i) * std::pow(std::abs(x[i]), 2.0 * theta);
    return v;
}

std::string LyapunovSpec::label() const {
    switch (shape) {
    case Shape::unit: return "unit";
    case Shape::weighted: return "weighted";
    case Shape::custom: return "custom";
    }
    return "custom";
}

namespace {

void check_dimensions(const SpinChainModel& model, const LyapunovSpec& spec, std::size_t size) {
    if (size != model.volume()) throw UsageError("state dimension does not match the model volume");
    if (!spec.weights.empty() && spec.weights.size() != size)
        throw UsageError("Lyapunov weights do not match the model volume");
}

double generator_with(const LocalDrift& f, const ChainCoefficients& a, const LyapunovSpec& spec, double t,
                      std::span<const double> x, std::span<double> drift) {
    drift_into(f, a, t, x, drift);
    const double th = spec.theta;
    double out = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double odd = th == 1.0 ? x[i] : std::copysign(std::pow(std::abs(x[i]), 2.0 * th - 1.0), x[i]);
        out += 2.0 * th * spec.weight(i) * odd * drift[i];
    }
    const double even = th == 1.0 ? 1.0 : std::pow(std::abs(x[0]), 2.0 * th - 2.0);
    out += th * (2.0 * th - 1.0) * spec.weight(0) * even;
    return out;
}

} // namespace

double generator_apply(const SpinChainModel& model, const LyapunovSpec& spec, double t, std::span<const double> x) {
    check_dimensions(model, spec, x.size());
    std::vector<double> drift(x.size());
    return generator_with(model.drift(), model.coefficients_at(t), spec, t, x, drift);
}

std::vector<double> lyapunov_samples(std::size_t n, const LyapunovSampling& s) {
    if (s.count == 0 || n == 0) throw UsageError("Lyapunov sampling needs at least one sample and one site");
    if (!(s.radius > 0.0) || !(s.cauchy_scale > 0.0)) throw UsageError("Lyapunov sampling radius and scale must be positive");
    std::vector<double> out(s.count * n, 0.0);
    const auto heavy = static_cast<std::size_t>(std::llround(s.heavy_fraction * static_cast<double>(s.count - 1)));
    for (std::size_t k = 1; k < s.count; ++k) {
        const CounterRng rng(s.seed, k);
        std::span<double> x(out.data() + k * n, n);
        rng.fill_normal(0, x);
        double norm = 0.0;
        for (double v : x) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        const double u = rng.uniform(2 * n + 2);
        double r;
        if (k <= heavy) {
            r = std::min(s.radius, s.cauchy_scale * std::abs(std::tan(std::numbers::pi * (u - 0.5))));
        } else {
            r = s.radius * std::pow(u, 1.0 / static_cast<double>(n));
        }
        for (double& v : x) v *= r / norm;
    }
    return out;
}

DriftCheckReport drift_condition_check(const SpinChainModel& model, const LyapunovSpec& spec, double c, double C,
                                       const LyapunovSampling& sampling) {
    if (!(c > 0.0)) throw UsageError("drift condition requires c > 0");
    const std::size_t n = model.volume();
    check_dimensions(model, spec, n);
    const auto states = lyapunov_samples(n, sampling);
    const auto a = model.coefficients_at(sampling.t);
    std::vector<double> excess(sampling.count);

#pragma omp parallel
    {
        std::vector<double> drift(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(sampling.count); ++k) {
            const std::span<const double> x(states.data() + static_cast<std::size_t>(k) * n, n);
            const double lv = generator_with(model.drift(), a, spec, sampling.t, x, drift);
            const double e = lv + c * spec.value(x) - C;
            excess[static_cast<std::size_t>(k)] = std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
        }
    }

    const auto worst = static_cast<std::size_t>(std::max_element(excess.begin(), excess.end()) - excess.begin());
    DriftCheckReport r;
    r.c = c;
    r.C = C;
    r.samples = sampling.count;
    r.max_violation = excess[worst];
    r.pass = r.max_violation <= 0.0;
    r.witness.assign(states.begin() + static_cast<std::ptrdiff_t>(worst * n),
                     states.begin() + static_cast<std::ptrdiff_t>((worst + 1) * n));
    return r;
}

std::string DriftCheckReport::to_json() const {
    nlohmann::ordered_json j;
    j["pass"] = pass;
    j["c"] = c;
    j["C"] = C;
    j["max_violation"] = max_violation;
    j["witness"] = witness;
    j["samples"] = samples;
    return j.dump();
}

AutoConstants auto_constants(const SpinChainModel& model, const LyapunovSpec& spec) {
    const auto& k = model.drift().constants();
    AutoConstants out;
    switch (spec.shape) {
    case LyapunovSpec::Shape::unit:
        if (spec.theta == 1.0 && spec.offset == 1.0) {
            out.constants = DriftConstantsPair{1.0, 2.0 * static_cast<double>(model.volume()) * k.eta + 2.0};
        } else {
            out.reason = "unit weights have a closed form only for theta = 1";
        }
        break;
    case LyapunovSpec::Shape::weighted:
        out.constants = DriftConstantsPair{1.0, 2.0 * spec.theta * k.eta * spec.weight_total};
        break;
    case LyapunovSpec::Shape::custom:
        out.reason = "no closed form for custom weights";
        break;
    }
    return out;
}

} // namespace latticespin
