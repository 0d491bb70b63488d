#pragma once

#include "latticespin/jets.hpp"
#include "latticespin/model.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latticespin {

/// Derivatives y_n^{(j)} at t = 0 and t = T, j = 0..n-1, of the last site along the uncontrolled chain.
struct EndpointJets {
    std::vector<double> at_start;
    std::vector<double> at_end;
    double horizon = 0.0;
};

/// Taylor coefficients of every site at t = 0 for the chain started at x, up to `order`.
/// Coefficients of site 1 beyond order 0 depend on the control and are left NaN.
std::vector<Taylor> chain_taylor(const SpinChainModel& model, std::span<const double> x, std::size_t order);

EndpointJets endpoint_jets(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T);

/// p(t) = sum_k c_k (t / scale)^k.
class SmoothInterpolant {
public:
    SmoothInterpolant(std::vector<double> coefficients, double scale, double horizon, double condition);

    const std::vector<double>& coefficients() const { return c_; }
    double scale() const { return scale_; }
    double horizon() const { return horizon_; }
    /// Condition number of the linear system that produced the coefficients.
    double condition() const { return condition_; }
    std::size_t degree() const { return c_.size() - 1; }

    double operator()(double t) const { return derivative(t, 0); }
    double derivative(double t, std::size_t k) const;
    /// Expansion about t in powers of (s - t), normalized coefficients, up to `order`.
    Taylor taylor(double t, std::size_t order) const;

private:
    std::vector<double> c_;
    double scale_;
    double horizon_;
    double condition_;
};

/// Degree 2m-1 polynomial with p^{(j)}(0) = start[j] and p^{(j)}(T) = end[j], j < m.
/// Solved directly in t; retried in t / T when the condition number exceeds 1e12.
SmoothInterpolant hermite_interpolant(std::span<const double> start, std::span<const double> end, double T);
SmoothInterpolant hermite_interpolant(const EndpointJets& jets, double T);

/**
 * Open-loop control on site 1 derived from an interpolant for y_n by solving the chain
 * equations top-down for y_{n-1}, ..., y_1 and finally u.
 */
class ControlPlan {
public:
    ControlPlan(SpinChainModel model, SmoothInterpolant top, std::vector<double> grid);

    double horizon() const { return top_.horizon(); }
    const SpinChainModel& model() const { return model_; }
    const SmoothInterpolant& interpolant() const { return top_; }
    const std::vector<double>& grid() const { return grid_; }
    /// u at the grid times.
    const std::vector<double>& control() const { return u_; }
    /// y at the grid times, grid-major.
    const std::vector<double>& states() const { return y_; }

    struct Point {
        std::vector<Taylor> y; // y[i] has order i + 1 (0-based site i)
        double u = 0.0;
    };
    /// Series of every y_i and the exact control at time t.
    Point at(double t) const;

    /// u between samples by 4-point Lagrange interpolation.
    double interpolated_control(double t) const;

    std::string to_csv(std::string_view comment = {}) const;

private:
    SpinChainModel model_;
    ChainCoefficients a_;
    SmoothInterpolant top_;
    std::vector<double> grid_;
    std::vector<double> u_;
    std::vector<double> y_;
};

inline constexpr std::size_t kDefaultControlSamples = 2048;

/// Uniform grid on [0, T] with `samples` points, endpoints included.
std::vector<double> control_grid(double T, std::size_t samples = kDefaultControlSamples);

ControlPlan back_substitute(const SpinChainModel& model, const SmoothInterpolant& interpolant, std::vector<double> grid);
ControlPlan back_substitute(const SpinChainModel& model, const SmoothInterpolant& interpolant);

/// Endpoint jets, interpolant and back-substitution in one call.
ControlPlan plan_steering(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T,
                          std::size_t samples = kDefaultControlSamples);

/// Integrates y' = A y + F(y) + e_1 u(t) from x over [0, T] with classical RK4; returns |y(T) - z|.
double verify_steering(const SpinChainModel& model, std::span<const double> x, std::span<const double> z, double T,
                       const ControlPlan& plan, double rk_step);

} // namespace latticespin
