#include "latticespin/jets.hpp"

#include "latticespin/errors.hpp"

#include <algorithm>
#include <bit>

namespace latticespin {

MultiDual::MultiDual(std::size_t generators, double value) : generators_(generators), c_(std::size_t{1} << generators, 0.0) {
    if (generators > 20) throw UsageError("MultiDual: too many generators");
    c_[0] = value;
}

MultiDual MultiDual::part(std::size_t g) const {
    MultiDual out(generators_);
    const std::size_t bit = std::size_t{1} << g;
    for (std::size_t m = 0; m < c_.size(); ++m)
        if ((m & bit) == 0) out.c_[m] = c_[m | bit];
    return out;
}

MultiDual MultiDual::times_generator(std::size_t g) const {
    MultiDual out(generators_);
    const std::size_t bit = std::size_t{1} << g;
    for (std::size_t m = 0; m < c_.size(); ++m)
        if ((m & bit) == 0) out.c_[m | bit] = c_[m];
    return out;
}

MultiDual& MultiDual::operator+=(const MultiDual& o) {
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] += o.c_[m];
    return *this;
}

MultiDual& MultiDual::operator-=(const MultiDual& o) {
    for (std::size_t m = 0; m < c_.size(); ++m) c_[m] -= o.c_[m];
    return *this;
}

MultiDual& MultiDual::operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
}

MultiDual operator*(const MultiDual& a, const MultiDual& b) {
    MultiDual out(a.generators_);
    const std::size_t full = a.c_.size() - 1;
    for (std::size_t i = 0; i < a.c_.size(); ++i) {
        if (a.c_[i] == 0.0) continue;
        const std::size_t rest = full & ~i;
        // enumerate every subset j of the complement of i
        for (std::size_t j = rest;; j = (j - 1) & rest) {
            out.c_[i | j] += a.c_[i] * b.c_[j];
            if (j == 0) break;
        }
    }
    return out;
}

std::size_t MultiDual::active_generators() const {
    std::size_t used = 0;
    for (std::size_t m = 1; m < c_.size(); ++m)
        if (c_[m] != 0.0) used |= m;
    return static_cast<std::size_t>(std::popcount(used));
}

MultiDual apply_jet(std::span<const double> jet, const MultiDual& v) {
    const std::size_t d = v.active_generators();
    if (jet.size() <= d) throw StructuralError("jet order insufficient for the nilpotent argument");
    MultiDual nil = v;
    nil[0] = 0.0;
    MultiDual out(v.generators(), jet[0]);
    MultiDual power(v.generators(), 1.0);
    double factorial = 1.0;
    for (std::size_t k = 1; k <= d; ++k) {
        power = power * nil;
        factorial *= static_cast<double>(k);
        out += power * (jet[k] / factorial);
    }
    return out;
}

// ---------------------------------------------------------------------------

Taylor::Taylor(std::size_t order, double value) : c_(order + 1, 0.0) { c_[0] = value; }

double Taylor::derivative_at(std::size_t k) const {
    double f = 1.0;
    for (std::size_t j = 2; j <= k; ++j) f *= static_cast<double>(j);
    return c_[k] * f;
}

Taylor Taylor::derivative() const {
    if (c_.size() == 1) throw UsageError("Taylor: cannot differentiate an order-0 series");
    Taylor out(order() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) out.c_[k - 1] = static_cast<double>(k) * c_[k];
    return out;
}

Taylor Taylor::truncated(std::size_t order) const {
    if (order > this->order()) throw UsageError("Taylor: truncation order exceeds the series order");
    return from_coefficients({c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(order) + 1});
}

Taylor& Taylor::operator+=(const Taylor& o) {
    c_.resize(std::min(c_.size(), o.c_.size()));
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
    return *this;
}

Taylor& Taylor::operator-=(const Taylor& o) {
    c_.resize(std::min(c_.size(), o.c_.size()));
    for (std::size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
    return *this;
}

Taylor& Taylor::operator*=(double s) {
    for (double& v : c_) v *= s;
    return *this;
}

Taylor operator*(const Taylor& a, const Taylor& b) {
    const std::size_t order = std::min(a.order(), b.order());
    Taylor out(order);
    for (std::size_t k = 0; k <= order; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j <= k; ++j) s += a.c_[j] * b.c_[k - j];
        out.c_[k] = s;
    }
    return out;
}

Taylor apply_jet(std::span<const double> jet, const Taylor& y) {
    const std::size_t order = y.order();
    if (jet.size() <= order) throw StructuralError("jet order insufficient for the series order");
    Taylor nil = y;
    nil[0] = 0.0;
    Taylor out(order, jet[0]);
    Taylor power(order, 1.0);
    double factorial = 1.0;
    for (std::size_t k = 1; k <= order; ++k) {
        power = power * nil;
        factorial *= static_cast<double>(k);
        out += power * (jet[k] / factorial);
    }
    return out;
}

} // namespace latticespin
