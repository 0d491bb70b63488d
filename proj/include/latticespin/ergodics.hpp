#pragma once

#include "latticespin/kernels.hpp"
#include "latticespin/model.hpp"
#include "latticespin/sim.hpp"
#include "latticespin/spaces.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace latticespin {

/// Uniform bins over [lo, hi]; values outside are counted in the edge bins.
struct Binning {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t bins = 64;

    double width() const { return (hi - lo) / static_cast<double>(bins); }
    std::size_t index(double v) const;
    double edge(std::size_t j) const { return lo + width() * static_cast<double>(j); }
    bool operator==(const Binning&) const = default;
};

inline constexpr std::size_t kDefaultBins = 64;

struct SiteHistogram {
    std::size_t site = 1;
    Binning binning;
    std::vector<std::uint64_t> counts;
};

/// Where an estimate came from; serialized as a single-line JSON object.
struct Provenance {
    std::string kind;
    std::uint64_t model_hash = 0;
    std::uint64_t seed = 0;
    double burn_in = 0.0;
    double thinning = 0.0;
    double h = 0.0;
    std::optional<double> phase;

    std::string to_json() const;
};

/**
 * Estimated law of an n-site state: per-site histograms, moment sums of orders
 * 1, 2, 4 and 2 theta, and the retained samples (kept for rebinning, resampling
 * and batch-means standard errors).
 */
class EmpiricalMeasure {
public:
    /// samples is sample-major: samples[k * volume + i]. An empty binning bins each site over its own range.
    EmpiricalMeasure(std::size_t volume, std::vector<double> samples, double theta, Provenance provenance,
                     std::vector<Binning> binning = {});

    std::size_t volume() const { return volume_; }
    std::size_t sample_count() const { return count_; }
    double theta() const { return theta_; }
    const Provenance& provenance() const { return provenance_; }
    std::span<const double> samples() const { return samples_; }
    std::span<const double> sample(std::size_t k) const { return {samples_.data() + k * volume_, volume_}; }

    /// Site numbering from 1.
    const SiteHistogram& histogram(std::size_t site) const { return histograms_.at(site - 1); }
    std::vector<Binning> binning() const;
    EmpiricalMeasure rebinned(std::vector<Binning> binning) const;

    /// Raw moment E|x_site|^order for order in {1, 2, 4, 2 theta} (order 1 is signed).
    double moment(std::size_t site, double order) const;
    double mean(std::size_t site) const { return moment(site, 1.0); }
    double variance(std::size_t site) const;
    /// Batch-means standard error of the sample mean of x^order (order 1, 2 or 4; 2 is the second moment).
    double moment_se(std::size_t site, int order, std::size_t batches = 32) const;
    /// Batch-means standard error of the sample variance.
    double variance_se(std::size_t site, std::size_t batches = 32) const;

private:
    struct Sums {
        double s1 = 0.0, s2 = 0.0, s4 = 0.0, s2theta = 0.0;
    };

    std::size_t volume_;
    std::size_t count_;
    std::vector<double> samples_;
    double theta_;
    Provenance provenance_;
    std::vector<SiteHistogram> histograms_;
    std::vector<Sums> sums_;
};

/// Per-site bins shared by every listed measure: [-L, L] with L = max over measures of |mean| + 6 std.
std::vector<Binning> shared_binning(std::span<const EmpiricalMeasure* const> measures, std::size_t bins = kDefaultBins);

/// (1/2) * mean over sites of sum_b |p_b - q_b|. Empty `sites` means every site.
/// Requires identical binning at every compared site.
double tv_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::span<const std::size_t> sites = {});

/// Rebins both measures onto their shared binning, then compares.
double tv_distance_shared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t bins = kDefaultBins);

/// Monte Carlo floor 2 / sqrt(n_eff) with n_eff = 2 n1 n2 / (n1 + n2).
double noise_floor(std::size_t n1, std::size_t n2);

/// Measure of the finite replicas at snapshot index ti.
EmpiricalMeasure measure_from_snapshots(const EnsembleSnapshots& snap, std::size_t ti, double theta, Provenance provenance);

// ---------------------------------------------------------------------------

struct InvariantOptions {
    double burn_in = 50.0;
    std::size_t n_samples = 10000;
    double thinning = 1.0;
    std::uint64_t seed = 1;
    double h = 0.01;
    Scheme scheme = Scheme::euler;
    std::vector<double> x0; // empty: start at the origin
};

/// Time average along one path: the state every `thinning` after `burn_in`.
EmpiricalMeasure estimate_invariant(const SpinChainModel& model, const InvariantOptions& options);

struct DecayFit {
    std::vector<double> times;
    std::vector<double> tv;
    double floor = 0.0;          // nominal 2 / sqrt(replicas)
    std::vector<double> floors;  // per-time floor actually applied
    std::size_t points_used = 0;
    std::optional<double> alpha; // reported only with at least 4 points above the floor
    double alpha_se = 0.0;       // standard error of the fitted slope
    double intercept = 0.0;
    double r2 = 0.0;
    bool already_mixed = false;
};

/// Least-squares fit of log tv = intercept - alpha t over points strictly above `floor`.
DecayFit fit_decay(std::span<const double> times, std::span<const double> tv, double floor);
/// Same with one floor per point.
DecayFit fit_decay(std::span<const double> times, std::span<const double> tv, std::span<const double> floors);

/// Expected histogram TV between two independent samples of one law with the pooled bin
/// probabilities of mu and nu: mean over sites of sum_b sqrt(p_b (1/n1 + 1/n2) / (2 pi)).
double null_tv_bias(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

struct DecayOptions {
    EnsembleOptions ensemble;
    std::size_t bins = kDefaultBins;
};

/// TV between the time-t laws started from x and from y (independent noise), fitted in t.
/// A point enters the fit when it exceeds both 2 / sqrt(replicas) and twice null_tv_bias.
DecayFit ergodic_decay(const SpinChainModel& model, std::span<const double> x, std::span<const double> y,
                       std::span<const double> check_times, std::size_t replicas, std::uint64_t seed,
                       const DecayOptions& options = {});

struct MomentSupEstimate {
    double initial_norm_p = 0.0; // ||x||^p in the weighted 2 theta norm
    double estimate = 0.0;       // E sup_{t <= T1} ||X_t||^p
    double se = 0.0;
    double ratio = 0.0;          // estimate / (1 + ||x||^p)
    std::size_t blowups = 0;
};

/// Monte Carlo E sup_{t <= T1} ||X_t||^p_{2 theta, rho} with theta from the model's drift constants.
MomentSupEstimate moment_sup_check(const SpinChainModel& model, std::span<const double> x, double T1, double p,
                                   std::size_t replicas, std::uint64_t seed, const SiteWeight& rho,
                                   const EnsembleOptions& options = {});

/// The same estimate along x scaled by each factor (common seed).
std::vector<MomentSupEstimate> moment_sup_ladder(const SpinChainModel& model, std::span<const double> x,
                                                 std::span<const double> scales, double T1, double p,
                                                 std::size_t replicas, std::uint64_t seed, const SiteWeight& rho,
                                                 const EnsembleOptions& options = {});

struct TailRow {
    std::size_t volume = 0;
    std::size_t n0 = 0;
    double estimate = 0.0;
    double se = 0.0;
};

struct TailTable {
    std::vector<TailRow> rows;
    /// Largest estimate over volumes for the given n0, with its standard error.
    std::pair<double, double> sup_over_volumes(std::size_t n0) const;
};

/// E sum_{i > n0} |X_i(t)|^2 rho(i) for each volume and n0.
TailTable tail_bound_check(const SpinChainModel& model, std::span<const std::size_t> volumes, const PaddedSequence& x,
                           double t, std::span<const std::size_t> n0_ladder, const SiteWeight& rho,
                           std::size_t replicas, std::uint64_t seed, const EnsembleOptions& options = {});

struct VolumeConvergence {
    std::vector<std::size_t> volumes;
    std::vector<double> d;  // d[a * volumes.size() + b]
    std::vector<double> se;
    std::size_t k = 0;

    double at(std::size_t a, std::size_t b) const { return d[a * volumes.size() + b]; }
    double se_at(std::size_t a, std::size_t b) const { return se[a * volumes.size() + b]; }
    /// max over pairs with min(n, m) >= v (0 when no pair qualifies).
    double headline(std::size_t v) const;
};

/// D[n][m] = E sup_{t <= T1} |X^(n)_(k) - X^(m)_(k)|^2 under shared noise (first k sites).
VolumeConvergence volume_convergence(const SpinChainModel& model, std::size_t k, std::span<const std::size_t> volumes,
                                     const PaddedSequence& x, double T1, std::size_t replicas, std::uint64_t seed,
                                     const EnsembleOptions& options = {});

struct ContinuityRow {
    double delta = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    std::size_t worst_direction = 0;
};

/// E sup_{t <= T1} |X^x_(k) - X^y_(k)|^2 for y = x + delta u / ||u||_{2,rho}, worst of `directions` random u.
std::vector<ContinuityRow> initial_continuity(const SpinChainModel& model, std::span<const double> x,
                                              std::span<const double> deltas, std::size_t k, double T1,
                                              std::size_t replicas, std::uint64_t seed, std::size_t directions,
                                              const SiteWeight& rho, const EnsembleOptions& options = {});

struct TightnessRow {
    double eps = 0.0;
    double sup_mass = 0.0;
    std::vector<double> masses; // one per measure
};

/// Mass outside the box |x_i|^{2 theta} <= (C + 1)/(eps v(i)) + C/v(i), C = 2 theta eta sum v,
/// from per-site marginals: 1 - prod_i (1 - P(|x_i| > b_i)).
std::vector<TightnessRow> tightness_diagnostic(std::span<const EmpiricalMeasure* const> measures,
                                               const WeightFamily& weights, const DriftConstants& constants,
                                               std::span<const double> eps_ladder);

/// Per-site half-widths of the box above.
std::vector<double> tightness_box(const SiteWeight& v, const DriftConstants& constants, double eps, std::size_t sites);

} // namespace latticespin
