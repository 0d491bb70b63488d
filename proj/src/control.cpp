#include "latticespin/control.hpp"

#include "latticespin/csv.hpp"
#include "latticespin/errors.hpp"
#include "latticespin/sim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace latticespin {

namespace {

void require_homogeneous(const SpinChainModel& model) {
    if (model.is_periodic()) throw UsageError("steering requires a time-homogeneous model");
}

void require_state(const SpinChainModel& model, std::span<const double> x, const char* what) {
    if (x.size() != model.volume()) throw UsageError(std::string(what) + " dimension does not match the model volume");
    for (double v : x)
        if (!std::isfinite(v)) throw UsageError(std::string(what) + " must be finite");
}

double factorial(std::size_t k) {
    double f = 1.0;
    for (std::size_t j = 2; j <= k; ++j) f *= static_cast<double>(j);
    return f;
}

/// d^j/dt^j t^k at t, as a coefficient: k!/(k-j)! t^(k-j).
double falling_power(std::size_t k, std::size_t j, double t) {
    if (j > k) return 0.0;
    double v = 1.0;
    for (std::size_t m = 0; m < j; ++m) v *= static_cast<double>(k - m);
    return v * std::pow(t, static_cast<double>(k - j));
}

} // namespace

std::vector<Taylor> chain_taylor(const SpinChainModel& model, std::span<const double> x, std::size_t order) {
    require_homogeneous(model);
    require_state(model, x, "initial state");
    const std::size_t n = x.size();
    const auto& f = model.drift();
    const auto a = model.coefficients_at(0.0);
    std::vector<Taylor> y;
    for (std::size_t i = 0; i < n; ++i) y.emplace_back(order, x[i]);
    for (std::size_t k = 1; k <= order; ++k) y[0][k] = std::numeric_limits<double>::quiet_NaN();

    for (std::size_t k = 0; k < order; ++k) {
        // coefficient k of the right-hand side fixes coefficient k + 1 of each site i >= 2
        std::vector<double> next(n, 0.0);
        for (std::size_t i = 1; i < n; ++i) {
            const auto fy = apply_jet(f.jet(0.0, x[i], static_cast<int>(k)), y[i].truncated(k));
            double rhs = fy[k] + a.sub[i] * y[i - 1][k];
            if (i + 1 < n) rhs += a.super[i] * y[i + 1][k];
            next[i] = rhs / static_cast<double>(k + 1);
        }
        for (std::size_t i = 1; i < n; ++i) y[i][k + 1] = next[i];
    }
    return y;
}

EndpointJets endpoint_jets(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T) {
    if (!(T > 0.0)) throw UsageError("steering horizon must be positive");
    require_state(model, z, "target state");
    const std::size_t n = model.volume();
    if (n >= 2 && !model.drift().has_jet(static_cast<int>(n) - 2))
        throw StructuralError("endpoint jets need local drift derivatives up to order " + std::to_string(n - 2));
    const auto start = chain_taylor(model, x, n - 1);
    const auto end = chain_taylor(model, z, n - 1);
    EndpointJets jets;
    jets.horizon = T;
    for (std::size_t j = 0; j < n; ++j) {
        jets.at_start.push_back(start[n - 1].derivative_at(j));
        jets.at_end.push_back(end[n - 1].derivative_at(j));
    }
    for (std::size_t j = 0; j < n; ++j)
        if (!std::isfinite(jets.at_start[j]) || !std::isfinite(jets.at_end[j]))
            throw NumericalError("endpoint jet is not finite");
    return jets;
}

// ---------------------------------------------------------------------------

SmoothInterpolant::SmoothInterpolant(std::vector<double> coefficients, double scale, double horizon, double condition)
    : c_(std::move(coefficients)), scale_(scale), horizon_(horizon), condition_(condition) {
    if (c_.empty()) throw UsageError("interpolant needs at least one coefficient");
    if (!(scale_ > 0.0)) throw UsageError("interpolant scale must be positive");
}

double SmoothInterpolant::derivative(double t, std::size_t k) const {
    const double tau = t / scale_;
    double v = 0.0;
    for (std::size_t m = c_.size(); m-- > k;) v += c_[m] * falling_power(m, k, tau);
    return v / std::pow(scale_, static_cast<double>(k));
}

Taylor SmoothInterpolant::taylor(double t, std::size_t order) const {
    Taylor out(order);
    for (std::size_t k = 0; k <= order; ++k) out[k] = derivative(t, k) / factorial(k);
    return out;
}

namespace {

std::optional<SmoothInterpolant> solve_hermite(std::span<const double> start, std::span<const double> end, double T, double scale) {
    const std::size_t m = start.size();
    const auto size = static_cast<Eigen::Index>(2 * m);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd b(size);
    const double tau_end = T / scale;
    for (std::size_t j = 0; j < m; ++j) {
        const double s = std::pow(scale, static_cast<double>(j));
        for (std::size_t k = 0; k < 2 * m; ++k) {
            A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = falling_power(k, j, 0.0);
            A(static_cast<Eigen::Index>(m + j), static_cast<Eigen::Index>(k)) = falling_power(k, j, tau_end);
        }
        b(static_cast<Eigen::Index>(j)) = start[j] * s;
        b(static_cast<Eigen::Index>(m + j)) = end[j] * s;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!(cond <= 1e12)) return std::nullopt;
    const Eigen::VectorXd c = A.fullPivLu().solve(b);
    return SmoothInterpolant(std::vector<double>(c.data(), c.data() + c.size()), scale, T, cond);
}

} // namespace

SmoothInterpolant hermite_interpolant(std::span<const double> start, std::span<const double> end, double T) {
    if (!(T > 0.0)) throw UsageError("interpolation horizon must be positive");
    if (start.empty() || start.size() != end.size()) throw UsageError("endpoint constraint lists must be nonempty and equally long");
    if (auto p = solve_hermite(start, end, T, 1.0)) return *p;
    if (auto p = solve_hermite(start, end, T, T)) return *p;
    throw NumericalError("Hermite system is ill-conditioned even after rescaling time");
}

SmoothInterpolant hermite_interpolant(const EndpointJets& jets, double T) {
    return hermite_interpolant(jets.at_start, jets.at_end, T);
}

// ---------------------------------------------------------------------------

ControlPlan::ControlPlan(SpinChainModel model, SmoothInterpolant top, std::vector<double> grid)
    : model_(std::move(model)), a_(model_.coefficients_at(0.0)), top_(std::move(top)), grid_(std::move(grid)) {
    require_homogeneous(model_);
    const std::size_t n = model_.volume();
    for (std::size_t i = 1; i < n; ++i)
        if (a_.sub[i] == 0.0)
            throw StructuralError("back-substitution divides by a_{" + std::to_string(i + 1) + "," + std::to_string(i) +
                                  "} = 0");
    if (n >= 2 && !model_.drift().has_jet(static_cast<int>(n) - 1))
        throw StructuralError("back-substitution needs local drift derivatives up to order " + std::to_string(n - 1));
    if (grid_.size() < 4) throw UsageError("control grid needs at least 4 points");
    if (!std::is_sorted(grid_.begin(), grid_.end()) || std::adjacent_find(grid_.begin(), grid_.end()) != grid_.end())
        throw UsageError("control grid must be strictly increasing");

    u_.reserve(grid_.size());
    y_.reserve(grid_.size() * n);
    for (double t : grid_) {
        const auto p = at(t);
        u_.push_back(p.u);
        for (const auto& yi : p.y) y_.push_back(yi[0]);
    }
}

ControlPlan::Point ControlPlan::at(double t) const {
    const std::size_t n = model_.volume();
    const auto& f = model_.drift();
    Point p;
    p.y.resize(n);
    p.y[n - 1] = top_.taylor(t, n);
    for (std::size_t s = n - 1; s >= 1; --s) {
        Taylor rhs = p.y[s].derivative();
        if (s + 1 < n) rhs -= a_.super[s] * p.y[s + 1];
        rhs -= apply_jet(f.jet(0.0, p.y[s][0], static_cast<int>(s)), p.y[s].truncated(s));
        p.y[s - 1] = rhs * (1.0 / a_.sub[s]);
    }
    p.u = p.y[0][1] - f(0.0, p.y[0][0]);
    if (n > 1) p.u -= a_.super[0] * p.y[1][0];
    return p;
}

double ControlPlan::interpolated_control(double t) const {
    const std::size_t m = grid_.size();
    auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
    std::size_t k = it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
    const std::size_t first = std::min(k > 0 ? k - 1 : 0, m - 4);
    double v = 0.0;
    for (std::size_t i = first; i < first + 4; ++i) {
        double w = 1.0;
        for (std::size_t j = first; j < first + 4; ++j)
            if (j != i) w *= (t - grid_[j]) / (grid_[i] - grid_[j]);
        v += w * u_[i];
    }
    return v;
}

std::string ControlPlan::to_csv(std::string_view comment) const {
    const std::size_t n = model_.volume();
    std::vector<std::string> header{"t", "u"};
    for (std::size_t i = 1; i <= n; ++i) header.push_back("y" + std::to_string(i));
    CsvBuilder csv(header, comment);
    std::vector<double> row(n + 2);
    for (std::size_t k = 0; k < grid_.size(); ++k) {
        row[0] = grid_[k];
        row[1] = u_[k];
        std::copy_n(y_.begin() + static_cast<std::ptrdiff_t>(k * n), n, row.begin() + 2);
        csv.row(row);
    }
    return csv.str();
}

std::vector<double> control_grid(double T, std::size_t samples) {
    if (!(T > 0.0)) throw UsageError("control horizon must be positive");
    if (samples < 4) throw UsageError("control grid needs at least 4 points");
    std::vector<double> g(samples);
    for (std::size_t k = 0; k < samples; ++k) g[k] = T * static_cast<double>(k) / static_cast<double>(samples - 1);
    g.back() = T;
    return g;
}

ControlPlan back_substitute(const SpinChainModel& model, const SmoothInterpolant& interpolant, std::vector<double> grid) {
    return {model, interpolant, std::move(grid)};
}

ControlPlan back_substitute(const SpinChainModel& model, const SmoothInterpolant& interpolant) {
    return back_substitute(model, interpolant, control_grid(interpolant.horizon()));
}

ControlPlan plan_steering(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T,
                          std::size_t samples) {
    const auto jets = endpoint_jets(model, x, z, T);
    return back_substitute(model, hermite_interpolant(jets, T), control_grid(T, samples));
}

double verify_steering(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T,
                       const ControlPlan& plan, double rk_step) {
    require_homogeneous(model);
    require_state(model, x, "initial state");
    require_state(model, z, "target state");
    if (!(rk_step > 0.0)) throw UsageError("rk_step must be positive");
    if (std::abs(plan.horizon() - T) > 1e-12 * T) throw UsageError("plan horizon does not match T");
    if (plan.model().volume() != model.volume()) throw UsageError("plan volume does not match the model");

    const std::size_t n = x.size();
    const auto a = model.coefficients_at(0.0);
    const auto& f = model.drift();
    const std::size_t steps = step_count(T, rk_step);
    const double h = T / static_cast<double>(steps);

    std::vector<double> y(x.begin(), x.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto rhs = [&](double t, const std::vector<double>& s, std::vector<double>& out) {
        drift_into(f, a, t, s, out);
        out[0] += plan.interpolated_control(t);
    };
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        rhs(t, y, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
        rhs(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
        rhs(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
        rhs(t + h, tmp, k4);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            norm2 += y[i] * y[i];
        }
        if (!std::isfinite(norm2) || norm2 > kBlowupNormSquared)
            throw NumericalError("controlled trajectory blew up at t = " + std::to_string(t + h));
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err += (y[i] - z[i]) * (y[i] - z[i]);
    return std::sqrt(err);
}

} // namespace latticespin
