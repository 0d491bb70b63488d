#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace latticespin {

/**
 * Element of the commutative algebra generated by e_0..e_{g-1} with e_k^2 = 0.
 * Coefficient c[mask] multiplies the product of the generators whose bits are set in mask.
 */
class MultiDual {
public:
    explicit MultiDual(std::size_t generators = 0, double value = 0.0);

    std::size_t generators() const { return generators_; }
    double value() const { return c_[0]; }
    double& operator[](std::size_t mask) { return c_[mask]; }
    double operator[](std::size_t mask) const { return c_[mask]; }

    /// Coefficient of e_g as an element without e_g: c'[m] = c[m | bit g] for m without bit g.
    MultiDual part(std::size_t g) const;
    /// this * e_g.
    MultiDual times_generator(std::size_t g) const;

    MultiDual& operator+=(const MultiDual& o);
    MultiDual& operator-=(const MultiDual& o);
    MultiDual& operator*=(double s);
    friend MultiDual operator+(MultiDual a, const MultiDual& b) { return a += b; }
    friend MultiDual operator-(MultiDual a, const MultiDual& b) { return a -= b; }
    friend MultiDual operator*(MultiDual a, double s) { return a *= s; }
    friend MultiDual operator*(double s, MultiDual a) { return a *= s; }
    friend MultiDual operator*(const MultiDual& a, const MultiDual& b);

    /// Number of generators appearing in some nonzero monomial; (v - v.value())^k vanishes beyond it.
    std::size_t active_generators() const;

private:
    std::size_t generators_;
    std::vector<double> c_;
};

/// g(v) from the derivatives jet[k] = g^{(k)}(v.value()); jet.size() - 1 must reach v.active_generators().
MultiDual apply_jet(std::span<const double> jet, const MultiDual& v);

/**
 * Truncated power series sum_{k <= order} c_k s^k (normalized coefficients, c_k = y^{(k)} / k!).
 */
class Taylor {
public:
    explicit Taylor(std::size_t order = 0, double value = 0.0);
    static Taylor from_coefficients(std::vector<double> c) { Taylor t; t.c_ = std::move(c); return t; }

    std::size_t order() const { return c_.size() - 1; }
    double operator[](std::size_t k) const { return c_[k]; }
    double& operator[](std::size_t k) { return c_[k]; }
    const std::vector<double>& coefficients() const { return c_; }
    /// k-th derivative at the expansion point.
    double derivative_at(std::size_t k) const;

    /// Series of the derivative, one order lower.
    Taylor derivative() const;
    Taylor truncated(std::size_t order) const;

    Taylor& operator+=(const Taylor& o);
    Taylor& operator-=(const Taylor& o);
    Taylor& operator*=(double s);
    friend Taylor operator+(Taylor a, const Taylor& b) { return a += b; }
    friend Taylor operator-(Taylor a, const Taylor& b) { return a -= b; }
    friend Taylor operator*(Taylor a, double s) { return a *= s; }
    friend Taylor operator*(double s, Taylor a) { return a *= s; }
    /// Product truncated to the lower of the two orders.
    friend Taylor operator*(const Taylor& a, const Taylor& b);

private:
    std::vector<double> c_;
};

/// g(y) as a series from jet[k] = g^{(k)}(y[0]), truncated to y.order(); jet.size() must exceed y.order().
Taylor apply_jet(std::span<const double> jet, const Taylor& y);

} // namespace latticespin
