#include "latticespin/spaces.hpp"

#include "latticespin/errors.hpp"

#include <algorithm>
#include <cmath>

namespace latticespin {

namespace {

void require_finite(std::span<const double> x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw UsageError(std::string(what) + ": non-finite coordinate");
}

double abs_pow(double v, double p) {
    const double a = std::abs(v);
    return p == 2.0 ? a * a : std::pow(a, p);
}

} // namespace

WeightedNormSpec::WeightedNormSpec(double p_, SiteWeight rho_) : p(p_), rho(std::move(rho_)) {
    if (!(p >= 1.0)) throw UsageError("weighted norm exponent must be >= 1");
}

double weighted_norm(std::span<const double> x, const WeightedNormSpec& spec) {
    if (!(spec.p >= 1.0)) throw UsageError("weighted norm exponent must be >= 1");
    require_finite(x, "weighted_norm");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += abs_pow(x[i], spec.p) * spec.rho(i + 1);
    return std::pow(s, 1.0 / spec.p);
}

double weighted_norm(const PaddedSequence& x, const WeightedNormSpec& spec) {
    return weighted_norm(x.prefix(), spec);
}

std::vector<double> project(const PaddedSequence& x, std::size_t k) {
    if (k == 0) throw UsageError("project: k must be positive");
    std::vector<double> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = x.at(i + 1);
    return out;
}

PaddedSequence embed(std::span<const double> xn) { return PaddedSequence({xn.begin(), xn.end()}); }

double tail_mass(std::span<const double> x, std::size_t n0, const SiteWeight& rho) {
    double s = 0.0;
    for (std::size_t i = n0; i < x.size(); ++i) s += x[i] * x[i] * rho(i + 1);
    return s;
}

double tail_mass(const PaddedSequence& x, std::size_t n0, const SiteWeight& rho) {
    return tail_mass(x.prefix(), n0, rho);
}

PrecompactWitness precompact_witness(std::span<const PaddedSequence> set, double eps, const WeightedNormSpec& spec) {
    if (!(eps > 0.0)) throw UsageError("precompact_witness: eps must be positive");
    if (set.empty()) throw UsageError("precompact_witness: empty set");
    PrecompactWitness w;
    for (const auto& x : set) {
        w.bound = std::max(w.bound, weighted_norm(x, spec));
        // suffix sums: tail from index j on; smallest j whose tail is below eps
        std::size_t need = 1;
        double tail = 0.0;
        for (std::size_t j = x.support(); j >= 1; --j) {
            tail += abs_pow(x.at(j), spec.p) * spec.rho(j);
            if (!(tail < eps)) {
                need = j + 1;
                break;
            }
        }
        w.n0 = std::max(w.n0, need);
    }
    return w;
}

} // namespace latticespin
