#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latticespin {

/// Declared dissipativity and growth constants of the local drift.
///   f(t,z) z <= eta - lambda z^2,   |f(t,z)| <= eta0 (1 + |z|^theta)
struct DriftConstants {
    double eta = 0.1;
    double lambda = 1.0;
    double theta = 1.0;
    double eta0 = 1.0;
};

/**
 * The single local interaction f(t, z) shared by every site.
 *
 * Built-in families carry closed-form derivative jets of any order; custom
 * drifts declare how many derivatives they can supply. A drift with a period
 * is T-periodic in t, otherwise t is ignored.
 */
class LocalDrift {
public:
    using EvalFn = std::function<double(double t, double z)>;
    /// Writes d^k f / dz^k at (t,z) for k = 0..out.size()-1.
    using JetFn = std::function<void(double t, double z, std::span<double> out)>;

    LocalDrift(EvalFn eval, JetFn jet, int max_jet_order, DriftConstants constants,
               std::optional<double> period, std::string description);

    /// f(z) = slope * z + forcing * sin(2 pi t / T + phase).
    static LocalDrift linear(double slope, DriftConstants constants);
    /// f(z) = alpha * z - beta * z^3.
    static LocalDrift cubic(double alpha, double beta, DriftConstants constants);
    /// f(z) = -gamma * z + kappa * tanh(z).
    static LocalDrift tanh_saturated(double gamma, double kappa, DriftConstants constants);

    /// Same drift plus amplitude * sin(2 pi t / period + phase); makes the drift periodic.
    LocalDrift with_forcing(double amplitude, double period, double phase = 0.0) const;

    double operator()(double t, double z) const { return eval_(t, z); }
    double value(double t, double z) const { return eval_(t, z); }

    /// Derivatives d^0 f .. d^k f at (t,z). Throws StructuralError past max_jet_order().
    std::vector<double> jet(double t, double z, int k) const;
    void jet_into(double t, double z, std::span<double> out) const;

    /// Highest derivative order available; negative means unlimited.
    int max_jet_order() const { return max_jet_order_; }
    bool has_jet(int k) const { return max_jet_order_ < 0 || k <= max_jet_order_; }

    const DriftConstants& constants() const { return constants_; }
    const std::optional<double>& period() const { return period_; }
    const std::string& description() const { return description_; }

private:
    EvalFn eval_;
    JetFn jet_;
    int max_jet_order_;
    DriftConstants constants_;
    std::optional<double> period_;
    std::string description_;
};

/**
 * Nearest-neighbour couplings a_{i,i-1}(t) (sub) and a_{i,i+1}(t) (super),
 * sites numbered from 1. a_{1,0} is identically zero.
 */
class CouplingCoefficients {
public:
    using SiteFn = std::function<double(int site, double t)>;

    CouplingCoefficients(SiteFn sub, SiteFn super, double bound, std::optional<double> period,
                         std::string description);

    /// Constant couplings; the bound defaults to max(|sub|, |super|).
    static CouplingCoefficients constant(double sub, double super, std::optional<double> bound = {});

    /// a(t) = base * (1 + amp * sin(2 pi t / period + phase)), separately for sub and super.
    static CouplingCoefficients sinusoidal(double sub_base, double sub_amp, double super_base,
                                           double super_amp, double period, double phase = 0.0,
                                           std::optional<double> bound = {});

    /// Per-site constants: sub[i-2] = a_{i,i-1} for i >= 2, super[i-1] = a_{i,i+1}. The last
    /// entry of each table repeats beyond its end.
    static CouplingCoefficients table(std::vector<double> sub, std::vector<double> super,
                                      std::optional<double> bound = {});

    /// a_{i,i-1}(t); zero for i <= 1.
    double sub(int site, double t) const { return site <= 1 ? 0.0 : sub_(site, t); }
    /// a_{i,i+1}(t).
    double super(int site, double t) const { return super_(site, t); }

    double bound() const { return bound_; }
    const std::optional<double>& period() const { return period_; }
    const std::string& description() const { return description_; }

    /// Copy with one subdiagonal entry a_{site,site-1} forced to zero.
    CouplingCoefficients with_zeroed_sub(int site) const;

private:
    SiteFn sub_;
    SiteFn super_;
    double bound_;
    std::optional<double> period_;
    std::string description_;
};

/// Coupling values at one time, 0-based: sub[i] = a_{i+1,i}, super[i] = a_{i+1,i+2}.
/// sub[0] = 0 and super[n-1] = 0 (the boundary term of the truncated chain is dropped).
struct ChainCoefficients {
    std::vector<double> sub;
    std::vector<double> super;
};

/// The n-site truncated chain with noise on site 1 only.
class SpinChainModel {
public:
    SpinChainModel(LocalDrift drift, CouplingCoefficients coupling, std::size_t volume);

    const LocalDrift& drift() const { return drift_; }
    const CouplingCoefficients& coupling() const { return coupling_; }
    std::size_t volume() const { return volume_; }
    /// Always {1}.
    std::vector<int> noise_sites() const { return {1}; }

    SpinChainModel with_volume(std::size_t volume) const;
    SpinChainModel with_coupling(CouplingCoefficients coupling) const;

    bool is_periodic() const { return period_.has_value(); }
    /// Common period of drift and coupling (absent for time-homogeneous models).
    const std::optional<double>& period() const { return period_; }

    ChainCoefficients coefficients_at(double t) const;

    /// Stable 64-bit fingerprint of the model description (not of the callables).
    std::uint64_t hash() const;
    std::string description() const;

private:
    LocalDrift drift_;
    CouplingCoefficients coupling_;
    std::size_t volume_;
    std::optional<double> period_;
};

/// Right-hand side of the truncated chain at (t, x).
std::vector<double> drift_vector(const SpinChainModel& model, double t, std::span<const double> x);

/// Allocation-free variant with precomputed couplings.
inline void drift_into(const LocalDrift& f, const ChainCoefficients& a, double t,
                       std::span<const double> x, std::span<double> out) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double v = f(t, x[i]);
        if (i > 0) v += a.sub[i] * x[i - 1];
        if (i + 1 < n) v += a.super[i] * x[i + 1];
        out[i] = v;
    }
}

// ---------------------------------------------------------------------------
// Spatial weights

enum class WeightKind { exponential, polynomial, table };

/**
 * A positive site weight w(i), i >= 1.
 *   exponential: exp(-kappa i)
 *   polynomial:  1 / (1 + kappa i^r), r > 1
 *   table:       listed values, continued geometrically with the ratio of the last two entries
 */
class SiteWeight {
public:
    static SiteWeight exponential(double kappa);
    static SiteWeight polynomial(double r, double kappa);
    static SiteWeight table(std::vector<double> values);

    double operator()(std::size_t site) const;
    WeightKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    double exponent() const { return r_; }
    const std::vector<double>& values() const { return values_; }

    /// Certified upper bound on sum_{i > after} w(i); +inf when not summable.
    double tail_bound(std::size_t after) const;
    /// Certified sum_{i >= 1} w(i) (upper bound for the polynomial kind, tight to ~1e-12).
    double total() const;
    bool summable() const;

    std::string description() const;

private:
    WeightKind kind_ = WeightKind::exponential;
    double kappa_ = 1.0;
    double r_ = 2.0;
    std::vector<double> values_;
};

/// Sum of w1(i)/w2(i) over all sites certified from the kind tags; +inf when divergent.
double ratio_sum_bound(const SiteWeight& numerator, const SiteWeight& denominator);

/// The weight rho of the state space together with the constants its assumptions quote.
struct WeightFamily {
    SiteWeight rho = SiteWeight::exponential(1.0);
    std::optional<SiteWeight> v;
    int ratio_range = 1;      // R
    double ratio_bound = 3.0; // N
    std::optional<double> lower_rate;   // r
    std::optional<double> lower_scale;  // M1
    std::optional<double> sup_ratio_bound; // M2

    /// Exponential rho with N = e^{kappa R} and the lower-bound constants filled in exactly.
    static WeightFamily exponential(double kappa, int range = 1);
};

// ---------------------------------------------------------------------------
// Assumption validation

struct SamplingGrid {
    double z_max = 10.0;
    std::size_t z_points = 4001;
    std::size_t t_points = 17;   // per period; homogeneous models sample t = 0 only
    std::size_t sites = 64;      // couplings/weights sampled on 1..max(sites, volume)
};

struct ConditionRecord {
    std::string id;
    bool pass = true;
    /// Location of the worst margin, e.g. {t, z} or {site, t}.
    std::vector<double> witness;
    /// Largest (lhs - rhs); positive means violated.
    double worst_margin = 0.0;
    std::string detail;
};

struct AssumptionReport {
    std::vector<ConditionRecord> conditions;

    bool pass() const;
    const ConditionRecord* find(std::string_view id) const;
};

/// Relative tolerance used by every sampled inequality.
inline constexpr double kValidationTolerance = 1e-12;

AssumptionReport validate_assumptions(const SpinChainModel& model, const WeightFamily& weights,
                                      const SamplingGrid& grid = {});

} // namespace latticespin
