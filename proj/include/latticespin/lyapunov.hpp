#pragma once

#include "latticespin/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latticespin {

/// V(x) = offset + sum_i w_i |x_i|^{2 theta}.
struct LyapunovSpec {
    enum class Shape { unit, weighted, custom };

    Shape shape = Shape::unit;
    std::vector<double> weights; // empty: all ones
    double theta = 1.0;
    double offset = 1.0;
    double weight_total = 0.0;   // sum of the weight over all sites (weighted shape)

    /// 1 + sum |x_i|^{2 theta}.
    static LyapunovSpec unit(double theta = 1.0);
    /// sum_{i <= sites} v(i) |x_i|^{2 theta}, no offset.
    static LyapunovSpec weighted(const SiteWeight& v, std::size_t sites, double theta = 1.0);
    static LyapunovSpec custom(std::vector<double> weights, double theta = 1.0, double offset = 1.0);

    double weight(std::size_t index0) const { return weights.empty() ? 1.0 : weights[index0]; }
    double value(std::span<const double> x) const;
    std::string label() const;
};

/// Generator of the chain applied to V at (t, x).
double generator_apply(const SpinChainModel& model, const LyapunovSpec& spec, double t, std::span<const double> x);

struct LyapunovSampling {
    std::size_t count = 10000;
    double radius = 1000.0;        // every sample has Euclidean norm <= radius
    double heavy_fraction = 0.5;   // share of Cauchy-radius samples
    double cauchy_scale = 1.0;
    double t = 0.0;
    std::uint64_t seed = 1;
};

/// The sample states: the origin, then uniform-ball and Cauchy-radius states, sample-major.
std::vector<double> lyapunov_samples(std::size_t volume, const LyapunovSampling& sampling);

struct DriftCheckReport {
    bool pass = false;
    double c = 0.0;
    double C = 0.0;
    double max_violation = 0.0; // max of LV + cV - C
    std::vector<double> witness;
    std::size_t samples = 0;

    std::string to_json() const;
};

/// Checks L V + c V <= C over the sampled states.
DriftCheckReport drift_condition_check(const SpinChainModel& model, const LyapunovSpec& spec, double c, double C,
                                       const LyapunovSampling& sampling = {});

struct DriftConstantsPair {
    double c = 1.0;
    double C = 0.0;
};

struct AutoConstants {
    std::optional<DriftConstantsPair> constants; // absent: no closed form for this shape
    std::string reason;
};

/// Closed-form (c, C): (1, 2 n eta + 2) for the unit shape with theta = 1; (1, 2 theta eta sum v) for the weighted shape.
AutoConstants auto_constants(const SpinChainModel& model, const LyapunovSpec& spec);

} // namespace latticespin
