#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace latticespin::oracle {

/// Stationary covariance of dX = A X dt + e1 dW: solves A S + S A^T + e1 e1^T = 0.
inline Eigen::MatrixXd stationary_covariance(const Eigen::MatrixXd& A) {
    const auto n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd K(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) = A(i, j) * I + (i == j ? A : Eigen::MatrixXd::Zero(n, n));
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n * n);
    q[0] = -1.0;
    const Eigen::VectorXd s = K.fullPivLu().solve(q);
    return Eigen::Map<const Eigen::MatrixXd>(s.data(), n, n);
}

/// Tridiagonal drift matrix of the linear chain f(z) = slope z with constant couplings a.
inline Eigen::MatrixXd linear_chain_matrix(Eigen::Index n, double slope, double a) {
    Eigen::MatrixXd A = slope * Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) A(i, i + 1) = A(i + 1, i) = a;
    return A;
}

/// Exact TV between the time-t laws of dX = -X dt + dW started at x and at y.
inline double ou_tv(double x, double y, double t) {
    const double s = std::sqrt((1.0 - std::exp(-2.0 * t)) / 2.0);
    return std::erf(std::abs(x - y) * std::exp(-t) / (2.0 * std::sqrt(2.0) * s));
}

} // namespace latticespin::oracle
