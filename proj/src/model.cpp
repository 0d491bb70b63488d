#include "latticespin/model.hpp"

#include "latticespin/errors.hpp"
#include "latticespin/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <utility>

namespace latticespin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool same_period(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); }

// Coefficients of d^k/dz^k tanh(z) as a polynomial in u = tanh(z).
std::vector<std::vector<double>> tanh_derivative_polys(int k) {
    std::vector<std::vector<double>> polys;
    polys.push_back({0.0, 1.0});
    for (int d = 1; d <= k; ++d) {
        const auto& p = polys.back();
        // d/dz P(u) = P'(u) (1 - u^2)
        std::vector<double> dp(p.size() > 1 ? p.size() - 1 : 1, 0.0);
        for (std::size_t j = 1; j < p.size(); ++j) dp[j - 1] = static_cast<double>(j) * p[j];
        std::vector<double> next(dp.size() + 2, 0.0);
        for (std::size_t j = 0; j < dp.size(); ++j) {
            next[j] += dp[j];
            next[j + 2] -= dp[j];
        }
        polys.push_back(std::move(next));
    }
    return polys;
}

double horner(const std::vector<double>& c, double u) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
}

std::string constants_text(const DriftConstants& c) {
    return "eta=" + fmt17(c.eta) + ",lambda=" + fmt17(c.lambda) + ",theta=" + fmt17(c.theta) +
           ",eta0=" + fmt17(c.eta0);
}

} // namespace

// ---------------------------------------------------------------------------
// LocalDrift

LocalDrift::LocalDrift(EvalFn eval, JetFn jet, int max_jet_order, DriftConstants constants,
                       std::optional<double> period, std::string description)
    : eval_(std::move(eval)),
      jet_(std::move(jet)),
      max_jet_order_(max_jet_order),
      constants_(constants),
      period_(period),
      description_(std::move(description)) {
    if (!eval_) throw UsageError("LocalDrift: eval callable is empty");
    if (!jet_) throw UsageError("LocalDrift: jet callable is empty");
    if (period_ && !(*period_ > 0.0)) throw UsageError("LocalDrift: period must be positive");
}

LocalDrift LocalDrift::linear(double slope, DriftConstants constants) {
    auto eval = [slope](double, double z) { return slope * z; };
    auto jet = [slope](double, double z, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        if (!out.empty()) out[0] = slope * z;
        if (out.size() > 1) out[1] = slope;
    };
    return {eval, jet, -1, constants, std::nullopt,
            "linear(slope=" + fmt17(slope) + ";" + constants_text(constants) + ")"};
}

LocalDrift LocalDrift::cubic(double alpha, double beta, DriftConstants constants) {
    auto eval = [alpha, beta](double, double z) { return alpha * z - beta * z * z * z; };
    auto jet = [alpha, beta](double, double z, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        const double d[4] = {alpha * z - beta * z * z * z, alpha - 3.0 * beta * z * z, -6.0 * beta * z,
                             -6.0 * beta};
        for (std::size_t k = 0; k < out.size() && k < 4; ++k) out[k] = d[k];
    };
    return {eval, jet, -1, constants, std::nullopt,
            "cubic(alpha=" + fmt17(alpha) + ",beta=" + fmt17(beta) + ";" + constants_text(constants) + ")"};
}

LocalDrift LocalDrift::tanh_saturated(double gamma, double kappa, DriftConstants constants) {
    auto eval = [gamma, kappa](double, double z) { return -gamma * z + kappa * std::tanh(z); };
    auto jet = [gamma, kappa](double, double z, std::span<double> out) {
        if (out.empty()) return;
        const int k = static_cast<int>(out.size()) - 1;
        const auto polys = tanh_derivative_polys(k);
        const double u = std::tanh(z);
        out[0] = -gamma * z + kappa * u;
        for (int d = 1; d <= k; ++d) out[d] = kappa * horner(polys[d], u);
        if (k >= 1) out[1] -= gamma;
    };
    return {eval, jet, -1, constants, std::nullopt,
            "tanh(gamma=" + fmt17(gamma) + ",kappa=" + fmt17(kappa) + ";" + constants_text(constants) + ")"};
}

LocalDrift LocalDrift::with_forcing(double amplitude, double period, double phase) const {
    if (!(period > 0.0)) throw UsageError("with_forcing: period must be positive");
    if (period_ && !same_period(*period_, period))
        throw UsageError("with_forcing: drift already has a different period");
    const double omega = kTwoPi / period;
    auto base_eval = eval_;
    auto base_jet = jet_;
    auto eval = [base_eval, amplitude, omega, phase](double t, double z) {
        return base_eval(t, z) + amplitude * std::sin(omega * t + phase);
    };
    auto jet = [base_jet, amplitude, omega, phase](double t, double z, std::span<double> out) {
        base_jet(t, z, out);
        if (!out.empty()) out[0] += amplitude * std::sin(omega * t + phase);
    };
    return {eval, jet, max_jet_order_, constants_, period,
            description_ + "+forcing(amp=" + fmt17(amplitude) + ",period=" + fmt17(period) +
                ",phase=" + fmt17(phase) + ")"};
}

std::vector<double> LocalDrift::jet(double t, double z, int k) const {
    if (k < 0) throw UsageError("LocalDrift::jet: negative order");
    std::vector<double> out(static_cast<std::size_t>(k) + 1);
    jet_into(t, z, out);
    return out;
}

void LocalDrift::jet_into(double t, double z, std::span<double> out) const {
    const int k = static_cast<int>(out.size()) - 1;
    if (!has_jet(k))
        throw StructuralError("local drift provides derivatives up to order " + std::to_string(max_jet_order_) +
                              ", order " + std::to_string(k) + " requested");
    jet_(t, z, out);
}

// ---------------------------------------------------------------------------
// CouplingCoefficients

CouplingCoefficients::CouplingCoefficients(SiteFn sub, SiteFn super, double bound, std::optional<double> period,
                                           std::string description)
    : sub_(std::move(sub)),
      super_(std::move(super)),
      bound_(bound),
      period_(period),
      description_(std::move(description)) {
    if (!sub_ || !super_) throw UsageError("CouplingCoefficients: empty callable");
    if (!(bound_ >= 0.0)) throw UsageError("CouplingCoefficients: bound M must be nonnegative");
    if (period_ && !(*period_ > 0.0)) throw UsageError("CouplingCoefficients: period must be positive");
}

CouplingCoefficients CouplingCoefficients::constant(double sub, double super, std::optional<double> bound) {
    const double m = bound.value_or(std::max(std::abs(sub), std::abs(super)));
    return {[sub](int, double) { return sub; }, [super](int, double) { return super; }, m, std::nullopt,
            "constant(sub=" + fmt17(sub) + ",super=" + fmt17(super) + ",M=" + fmt17(m) + ")"};
}

CouplingCoefficients CouplingCoefficients::sinusoidal(double sub_base, double sub_amp, double super_base,
                                                      double super_amp, double period, double phase,
                                                      std::optional<double> bound) {
    if (!(period > 0.0)) throw UsageError("sinusoidal coupling: period must be positive");
    const double omega = kTwoPi / period;
    const double m = bound.value_or(std::max(std::abs(sub_base) * (1.0 + std::abs(sub_amp)),
                                             std::abs(super_base) * (1.0 + std::abs(super_amp))));
    auto sub = [sub_base, sub_amp, omega, phase](int, double t) {
        return sub_base * (1.0 + sub_amp * std::sin(omega * t + phase));
    };
    auto super = [super_base, super_amp, omega, phase](int, double t) {
        return super_base * (1.0 + super_amp * std::sin(omega * t + phase));
    };
    return {sub, super, m, period,
            "sinusoidal(sub=" + fmt17(sub_base) + ",sub_amp=" + fmt17(sub_amp) + ",super=" + fmt17(super_base) +
                ",super_amp=" + fmt17(super_amp) + ",period=" + fmt17(period) + ",phase=" + fmt17(phase) +
                ",M=" + fmt17(m) + ")"};
}

CouplingCoefficients CouplingCoefficients::table(std::vector<double> sub, std::vector<double> super,
                                                 std::optional<double> bound) {
    if (sub.empty() || super.empty()) throw UsageError("table coupling: tables must be nonempty");
    double m = 0.0;
    for (double a : sub) m = std::max(m, std::abs(a));
    for (double a : super) m = std::max(m, std::abs(a));
    m = bound.value_or(m);
    std::string desc = "table(sub=[";
    for (double a : sub) desc += fmt17(a) + ",";
    desc += "],super=[";
    for (double a : super) desc += fmt17(a) + ",";
    desc += "],M=" + fmt17(m) + ")";
    auto sub_fn = [sub](int site, double) {
        const auto idx = static_cast<std::size_t>(std::max(site - 2, 0));
        return sub[std::min(idx, sub.size() - 1)];
    };
    auto super_fn = [super](int site, double) {
        const auto idx = static_cast<std::size_t>(std::max(site - 1, 0));
        return super[std::min(idx, super.size() - 1)];
    };
    return {sub_fn, super_fn, m, std::nullopt, desc};
}

CouplingCoefficients CouplingCoefficients::with_zeroed_sub(int site) const {
    auto base = sub_;
    auto sub = [base, site](int i, double t) { return i == site ? 0.0 : base(i, t); };
    return {sub, super_, bound_, period_, description_ + "+zero_sub(" + std::to_string(site) + ")"};
}

// ---------------------------------------------------------------------------
// SpinChainModel

SpinChainModel::SpinChainModel(LocalDrift drift, CouplingCoefficients coupling, std::size_t volume)
    : drift_(std::move(drift)), coupling_(std::move(coupling)), volume_(volume) {
    if (volume_ == 0) throw UsageError("SpinChainModel: volume must be positive");
    const auto& pd = drift_.period();
    const auto& pc = coupling_.period();
    if (pd && pc && !same_period(*pd, *pc))
        throw UsageError("SpinChainModel: drift period " + fmt17(*pd) + " differs from coupling period " +
                         fmt17(*pc));
    period_ = pd ? pd : pc;
}

SpinChainModel SpinChainModel::with_volume(std::size_t volume) const { return {drift_, coupling_, volume}; }

SpinChainModel SpinChainModel::with_coupling(CouplingCoefficients coupling) const {
    return {drift_, std::move(coupling), volume_};
}

ChainCoefficients SpinChainModel::coefficients_at(double t) const {
    ChainCoefficients c{std::vector<double>(volume_, 0.0), std::vector<double>(volume_, 0.0)};
    for (std::size_t i = 0; i < volume_; ++i) {
        const int site = static_cast<int>(i) + 1;
        c.sub[i] = coupling_.sub(site, t);
        if (i + 1 < volume_) c.super[i] = coupling_.super(site, t);
    }
    return c;
}

std::string SpinChainModel::description() const {
    return "chain(n=" + std::to_string(volume_) + ";drift=" + drift_.description() +
           ";coupling=" + coupling_.description() + ")";
}

std::uint64_t SpinChainModel::hash() const { return fnv1a64(description()); }

std::vector<double> drift_vector(const SpinChainModel& model, double t, std::span<const double> x) {
    if (x.size() != model.volume())
        throw UsageError("drift_vector: state has " + std::to_string(x.size()) + " entries, model volume is " +
                         std::to_string(model.volume()));
    std::vector<double> out(x.size());
    drift_into(model.drift(), model.coefficients_at(t), t, x, out);
    return out;
}

// ---------------------------------------------------------------------------
// Weights

SiteWeight SiteWeight::exponential(double kappa) {
    if (!(kappa > 0.0)) throw UsageError("exponential weight: kappa must be positive");
    SiteWeight w;
    w.kind_ = WeightKind::exponential;
    w.kappa_ = kappa;
    return w;
}

SiteWeight SiteWeight::polynomial(double r, double kappa) {
    if (!(kappa > 0.0)) throw UsageError("polynomial weight: kappa must be positive");
    if (!(r > 1.0)) throw UsageError("polynomial weight: exponent r must exceed 1");
    SiteWeight w;
    w.kind_ = WeightKind::polynomial;
    w.kappa_ = kappa;
    w.r_ = r;
    return w;
}

SiteWeight SiteWeight::table(std::vector<double> values) {
    if (values.size() < 2) throw UsageError("table weight: at least two entries required");
    for (double v : values)
        if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("table weight: entries must be positive and finite");
    SiteWeight w;
    w.kind_ = WeightKind::table;
    w.values_ = std::move(values);
    return w;
}

double SiteWeight::operator()(std::size_t site) const {
    const double i = static_cast<double>(site);
    switch (kind_) {
    case WeightKind::exponential:
        return std::exp(-kappa_ * i);
    case WeightKind::polynomial:
        return 1.0 / (1.0 + kappa_ * std::pow(i, r_));
    case WeightKind::table: {
        const std::size_t len = values_.size();
        if (site >= 1 && site <= len) return values_[site - 1];
        if (site == 0) return values_.front();
        const double q = values_[len - 1] / values_[len - 2];
        return values_[len - 1] * std::pow(q, static_cast<double>(site - len));
    }
    }
    return 0.0;
}

double SiteWeight::tail_bound(std::size_t after) const {
    const double a = static_cast<double>(after);
    switch (kind_) {
    case WeightKind::exponential:
        // sum_{i > a} e^{-k i} = e^{-k (a+1)} / (1 - e^{-k})
        return std::exp(-kappa_ * (a + 1.0)) / -std::expm1(-kappa_);
    case WeightKind::polynomial: {
        // 1/(1 + k i^r) < 1/(k i^r); sum_{i > a} i^{-r} <= integral from max(a,1)-ish
        if (after == 0) return (*this)(1) + std::pow(1.0, 1.0 - r_) / (kappa_ * (r_ - 1.0));
        return std::pow(a, 1.0 - r_) / (kappa_ * (r_ - 1.0));
    }
    case WeightKind::table: {
        const std::size_t len = values_.size();
        const double q = values_[len - 1] / values_[len - 2];
        if (!(q < 1.0)) return std::numeric_limits<double>::infinity();
        double finite = 0.0;
        for (std::size_t i = after + 1; i <= len; ++i) finite += values_[i - 1];
        const std::size_t start = std::max(after, len);
        // geometric tail beyond max(after, len)
        const double first = (*this)(start + 1);
        return finite + first / (1.0 - q);
    }
    }
    return std::numeric_limits<double>::infinity();
}

double SiteWeight::total() const {
    switch (kind_) {
    case WeightKind::exponential:
        return 1.0 / std::expm1(kappa_);
    case WeightKind::polynomial: {
        // partial sum plus an integral tail bound; the bound is tight to ~N^{1-r} / (k (r-1)) * r / N
        constexpr std::size_t kTerms = 200000;
        double s = 0.0;
        for (std::size_t i = kTerms; i >= 1; --i) s += (*this)(i);
        return s + tail_bound(kTerms);
    }
    case WeightKind::table:
        return tail_bound(0);
    }
    return std::numeric_limits<double>::infinity();
}

bool SiteWeight::summable() const { return std::isfinite(tail_bound(1)); }

std::string SiteWeight::description() const {
    switch (kind_) {
    case WeightKind::exponential:
        return "exp(kappa=" + fmt17(kappa_) + ")";
    case WeightKind::polynomial:
        return "poly(r=" + fmt17(r_) + ",kappa=" + fmt17(kappa_) + ")";
    case WeightKind::table: {
        std::string s = "table(";
        for (double v : values_) s += fmt17(v) + ",";
        return s + ")";
    }
    }
    return {};
}

double ratio_sum_bound(const SiteWeight& num, const SiteWeight& den) {
    const double inf = std::numeric_limits<double>::infinity();
    using K = WeightKind;
    if (num.kind() == K::exponential && den.kind() == K::exponential) {
        const double k = num.kappa() - den.kappa();
        return k > 0.0 ? 1.0 / std::expm1(k) : inf;
    }
    if (num.kind() == K::exponential && den.kind() == K::polynomial) {
        // e^{-k i} (1 + c i^r): summable for any k > 0. Bound numerically with a geometric tail.
        double s = 0.0;
        std::size_t i = 1;
        for (; i <= 100000; ++i) {
            const double term = num(i) / den(i);
            s += term;
            if (i > 10 && term < 1e-18 * s) break;
        }
        return s * (1.0 + 1e-12);
    }
    if (num.kind() == K::polynomial && den.kind() == K::exponential) return inf;
    if (num.kind() == K::polynomial && den.kind() == K::polynomial) {
        // ratio ~ (c_den / c_num) i^{r_den - r_num}
        const double excess = num.exponent() - den.exponent();
        if (!(excess > 1.0)) return inf;
        constexpr std::size_t kTerms = 100000;
        double s = 0.0;
        for (std::size_t i = kTerms; i >= 1; --i) s += num(i) / den(i);
        const double c = (1.0 + den.kappa()) / num.kappa(); // (1 + k_d i^r_d) <= (1 + k_d) i^{r_d}
        return s + c * std::pow(static_cast<double>(kTerms), 1.0 - excess) / (excess - 1.0);
    }
    // At least one table weight: both continue geometrically (or polynomially) past the table.
    auto tail_ratio = [](const SiteWeight& w) -> double {
        if (w.kind() == K::table) {
            const auto& v = w.values();
            return v[v.size() - 1] / v[v.size() - 2];
        }
        if (w.kind() == K::exponential) return std::exp(-w.kappa());
        return 1.0; // polynomial: sub-geometric
    };
    const double q = tail_ratio(num) / tail_ratio(den);
    if (!(q < 1.0)) return inf;
    constexpr std::size_t kTerms = 4096;
    double s = 0.0;
    for (std::size_t i = 1; i <= kTerms; ++i) s += num(i) / den(i);
    const double last = num(kTerms) / den(kTerms);
    return s + last * q / (1.0 - q) * (1.0 + 1e-9);
}

WeightFamily WeightFamily::exponential(double kappa, int range) {
    WeightFamily w;
    w.rho = SiteWeight::exponential(kappa);
    w.ratio_range = range;
    w.ratio_bound = std::exp(kappa * range);
    w.lower_rate = kappa;
    w.lower_scale = 1.0;
    w.sup_ratio_bound = 1.0;
    return w;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

class ConditionTracker {
public:
    explicit ConditionTracker(std::string id) { rec_.id = std::move(id); rec_.worst_margin = -std::numeric_limits<double>::infinity(); }

    // Records lhs <= rhs at the given witness.
    void le(double lhs, double rhs, std::vector<double> witness) {
        const double margin = lhs - rhs;
        const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
        if (margin > kValidationTolerance * scale || !std::isfinite(margin)) rec_.pass = false;
        if (margin >= rec_.worst_margin || !std::isfinite(margin)) {
            rec_.worst_margin = margin;
            rec_.witness = std::move(witness);
        }
    }
    // Strict inequality lhs < rhs (declared-constant checks, no tolerance).
    void lt(double lhs, double rhs, std::vector<double> witness) {
        const double margin = lhs - rhs;
        if (!(margin < 0.0)) rec_.pass = false;
        if (margin >= rec_.worst_margin || std::isnan(margin)) {
            rec_.worst_margin = margin;
            rec_.witness = std::move(witness);
        }
    }
    void fail(std::string detail) {
        rec_.pass = false;
        rec_.detail = std::move(detail);
    }
    void note(std::string detail) { rec_.detail = std::move(detail); }
    ConditionRecord done() && {
        if (!std::isfinite(rec_.worst_margin) && rec_.pass) rec_.worst_margin = 0.0;
        return std::move(rec_);
    }

private:
    ConditionRecord rec_;
};

double checked_eval(const LocalDrift& f, double t, double z) {
    const double v = f(t, z);
    if (!std::isfinite(v))
        throw ModelError("local drift is not finite at (t=" + fmt17(t) + ", z=" + fmt17(z) + ")");
    return v;
}

} // namespace

bool AssumptionReport::pass() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) { return c.pass; });
}

const ConditionRecord* AssumptionReport::find(std::string_view id) const {
    for (const auto& c : conditions)
        if (c.id == id) return &c;
    return nullptr;
}

AssumptionReport validate_assumptions(const SpinChainModel& model, const WeightFamily& weights,
                                      const SamplingGrid& grid) {
    if (grid.z_points == 0 || grid.t_points == 0 || grid.sites == 0)
        throw UsageError("validate_assumptions: sampling grid is empty");
    if (!(grid.z_max > 0.0)) throw UsageError("validate_assumptions: z_max must be positive");

    const auto& f = model.drift();
    const auto& a = model.coupling();
    const auto& c = f.constants();
    const auto period = model.period();

    std::vector<double> zs(grid.z_points);
    for (std::size_t j = 0; j < grid.z_points; ++j)
        zs[j] = grid.z_points == 1 ? grid.z_max
                                   : grid.z_max * (2.0 * static_cast<double>(j) / static_cast<double>(grid.z_points - 1) - 1.0);
    std::vector<double> ts{0.0};
    if (period) {
        ts.clear();
        for (std::size_t j = 0; j < grid.t_points; ++j)
            ts.push_back(*period * static_cast<double>(j) / static_cast<double>(grid.t_points));
    }
    const std::size_t sites = std::max(grid.sites, model.volume());

    AssumptionReport report;

    {
        ConditionTracker k("drift.constants");
        k.lt(0.5, c.lambda, {c.lambda});
        k.lt(0.0, c.eta, {c.eta});
        k.le(1.0, c.theta, {c.theta});
        k.le(0.0, c.eta0, {c.eta0});
        report.conditions.push_back(std::move(k).done());
    }
    {
        ConditionTracker diss("drift.weak_dissipativity");
        ConditionTracker growth("drift.growth");
        for (double t : ts) {
            for (double z : zs) {
                const double v = checked_eval(f, t, z);
                diss.le(v * z, c.eta - c.lambda * z * z, {t, z});
                growth.le(std::abs(v), c.eta0 * (1.0 + std::pow(std::abs(z), c.theta)), {t, z});
            }
        }
        report.conditions.push_back(std::move(diss).done());
        report.conditions.push_back(std::move(growth).done());
    }
    {
        ConditionTracker jet("drift.jet_consistency");
        std::array<double, 2> d{};
        const std::size_t stride = std::max<std::size_t>(1, zs.size() / 200);
        for (double t : ts) {
            for (std::size_t j = 0; j < zs.size(); j += stride) {
                const double z = zs[j];
                f.jet_into(t, z, d);
                const double v = checked_eval(f, t, z);
                jet.le(std::abs(d[0] - v), 1e-12 * std::max(1.0, std::abs(v)), {t, z, 0.0});
                const double h = 1e-5 * (1.0 + std::abs(z));
                const double fd = (checked_eval(f, t, z + h) - checked_eval(f, t, z - h)) / (2.0 * h);
                jet.le(std::abs(d[1] - fd), 1e-6 * std::max(1.0, std::abs(d[1]) + std::abs(v)), {t, z, 1.0});
            }
        }
        report.conditions.push_back(std::move(jet).done());
    }
    if (period) {
        ConditionTracker per("drift.periodic");
        for (double t : ts)
            for (std::size_t j = 0; j < zs.size(); j += 10) {
                const double z = zs[j];
                const double v0 = checked_eval(f, t, z);
                const double v1 = checked_eval(f, t + *period, z);
                per.le(std::abs(v1 - v0), 1e-9 * std::max(1.0, std::abs(v0)), {t, z});
            }
        report.conditions.push_back(std::move(per).done());
    }
    {
        ConditionTracker bounded("coupling.bounded");
        ConditionTracker nonzero("coupling.subdiagonal_nonzero");
        const double m = a.bound();
        for (std::size_t s = 1; s <= sites; ++s) {
            const int site = static_cast<int>(s);
            for (double t : ts) {
                const double sub = a.sub(site, t);
                const double sup = a.super(site, t);
                bounded.le(std::abs(sup), m, {static_cast<double>(site), t});
                if (site >= 2) {
                    bounded.le(std::abs(sub), m, {static_cast<double>(site), t});
                    nonzero.lt(-std::abs(sub), 0.0, {static_cast<double>(site), t});
                }
            }
        }
        if (sites < 2) nonzero.note("single site: no subdiagonal entries");
        report.conditions.push_back(std::move(bounded).done());
        report.conditions.push_back(std::move(nonzero).done());
        ConditionTracker origin("coupling.origin_zero");
        for (double t : ts) origin.le(std::abs(a.sub(1, t)), 0.0, {1.0, t});
        report.conditions.push_back(std::move(origin).done());
        if (period) {
            ConditionTracker per("coupling.periodic");
            for (std::size_t s = 1; s <= sites; ++s)
                for (double t : ts) {
                    const int site = static_cast<int>(s);
                    per.le(std::abs(a.sub(site, t + *period) - a.sub(site, t)), 1e-9 * m,
                           {static_cast<double>(site), t});
                    per.le(std::abs(a.super(site, t + *period) - a.super(site, t)), 1e-9 * m,
                           {static_cast<double>(site), t});
                }
            report.conditions.push_back(std::move(per).done());
        }
    }
    {
        ConditionTracker margin("model.dissipativity_margin");
        margin.lt(2.0 * a.bound(), c.lambda - 0.5, {a.bound(), c.lambda});
        report.conditions.push_back(std::move(margin).done());
        ConditionTracker noise("model.noise_sites");
        const auto ns = model.noise_sites();
        if (ns.size() != 1 || ns.front() != 1) noise.fail("noise must act on site 1 only");
        report.conditions.push_back(std::move(noise).done());
    }

    // weights
    const auto& rho = weights.rho;
    {
        ConditionTracker ratio("weights.ratio");
        const auto r = static_cast<std::size_t>(std::max(weights.ratio_range, 0));
        for (std::size_t j = 1; j <= sites; ++j)
            for (std::size_t g = (j > r ? j - r : 1); g <= j + r; ++g)
                ratio.le(rho(g) / rho(j), weights.ratio_bound, {static_cast<double>(g), static_cast<double>(j)});
        report.conditions.push_back(std::move(ratio).done());
    }
    {
        ConditionTracker sum("weights.summable");
        for (std::size_t i = 1; i <= sites; ++i) sum.lt(-rho(i), 0.0, {static_cast<double>(i)});
        const double tail = rho.tail_bound(sites);
        if (!std::isfinite(tail)) sum.fail("rho tail is not summable");
        else sum.note("certified total " + fmt17(rho.total()) + ", tail beyond " + std::to_string(sites) + " <= " + fmt17(tail));
        report.conditions.push_back(std::move(sum).done());
    }
    if (weights.lower_rate && weights.lower_scale) {
        ConditionTracker lower("weights.lower_bound");
        for (std::size_t i = 1; i <= sites; ++i) {
            const double bound = *weights.lower_scale * std::exp(-*weights.lower_rate * static_cast<double>(i));
            lower.le(bound, rho(i), {static_cast<double>(i)});
        }
        report.conditions.push_back(std::move(lower).done());
    }
    if (weights.sup_ratio_bound) {
        ConditionTracker sup("weights.sup_ratio");
        double running_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i <= sites; ++i) {
            running_min = std::min(running_min, rho(i));
            sup.le(rho(i) / running_min, *weights.sup_ratio_bound, {static_cast<double>(i)});
        }
        report.conditions.push_back(std::move(sup).done());
    }
    if (weights.v) {
        ConditionTracker aux("weights.aux_summable");
        const double sv = weights.v->total();
        const double sr = ratio_sum_bound(rho, *weights.v);
        if (!std::isfinite(sv)) aux.fail("sum of v diverges");
        else if (!std::isfinite(sr)) aux.fail("sum of rho/v diverges");
        else aux.note("sum v = " + fmt17(sv) + ", sum rho/v <= " + fmt17(sr));
        report.conditions.push_back(std::move(aux).done());

        ConditionTracker tight("tightness.lambda");
        const double m = a.bound();
        const double n = weights.ratio_bound;
        const double th = c.theta;
        const double rhs = (2.0 * m * n + 2.0 * (2.0 * th - 1.0) * m) / (2.0 * th) + th + c.eta + 1.0 / (2.0 * th) - 0.5;
        tight.lt(rhs, c.lambda, {c.lambda, rhs});
        report.conditions.push_back(std::move(tight).done());
    }
    return report;
}

} // namespace latticespin
