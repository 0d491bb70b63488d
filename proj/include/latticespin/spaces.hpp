#pragma once

#include "latticespin/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace latticespin {

/// A real sequence indexed from 1 with a dense prefix and an implicit zero tail.
class PaddedSequence {
public:
    PaddedSequence() = default;
    explicit PaddedSequence(std::vector<double> prefix) : prefix_(std::move(prefix)) {}

    /// x_i for i >= 1; zero past the stored prefix.
    double at(std::size_t i) const { return (i >= 1 && i <= prefix_.size()) ? prefix_[i - 1] : 0.0; }
    std::size_t support() const { return prefix_.size(); }
    std::span<const double> prefix() const { return prefix_; }

private:
    std::vector<double> prefix_;
};

struct WeightedNormSpec {
    double p = 2.0;
    SiteWeight rho = SiteWeight::exponential(1.0);

    WeightedNormSpec() = default;
    WeightedNormSpec(double p_, SiteWeight rho_);
};

/// (sum_i |x_i|^p rho(i))^{1/p}.
double weighted_norm(const PaddedSequence& x, const WeightedNormSpec& spec);
double weighted_norm(std::span<const double> x, const WeightedNormSpec& spec);

/// First k coordinates.
std::vector<double> project(const PaddedSequence& x, std::size_t k);
PaddedSequence embed(std::span<const double> xn);

/// sum_{i > n0} |x_i|^2 rho(i).
double tail_mass(const PaddedSequence& x, std::size_t n0, const SiteWeight& rho);
double tail_mass(std::span<const double> x, std::size_t n0, const SiteWeight& rho);

struct PrecompactWitness {
    double bound = 0.0;   // max norm over the set
    std::size_t n0 = 1;   // least index with every weighted tail from n0 on below eps
};

PrecompactWitness precompact_witness(std::span<const PaddedSequence> set, double eps, const WeightedNormSpec& spec);

} // namespace latticespin
