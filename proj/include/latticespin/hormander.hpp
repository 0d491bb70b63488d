#pragma once

#include "latticespin/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace latticespin {

/**
 * Columns A0, A1, [A0,A1], [A0,[A0,A1]], ... up to n-1 nested brackets, evaluated at one state.
 * Row 0 is the time component, row i the site-i component. [V,W] = DV W - DW V.
 */
struct BracketBasis {
    std::vector<double> state;
    Eigen::MatrixXd columns; // (n+1) x (n+1)

    std::size_t volume() const { return state.size(); }
};

/// Brackets by exact nested directional derivatives; the pivot of each bracket column is set to
/// prod_{j=2}^{i+1} a_{j,j-1} with zeros below it.
BracketBasis bracket_basis_analytic(const SpinChainModel& model, std::span<const double> x);

struct NumericBracketOptions {
    double fd_step = 1e-4;
    /// The plain nested central difference is kept when halving the step moves the column by at
    /// most this much relative to its norm; otherwise a step ladder of five-point central differences is used.
    double agreement = 1e-3;
};

struct NumericBracketInfo {
    std::vector<bool> laddered; // per column: the five-point ladder replaced the plain difference
    std::vector<double> step;       // step used per column (0 for the raw fields)
};

/// Brackets by nested central differences of the drift field.
BracketBasis bracket_basis_numeric(const SpinChainModel& model, std::span<const double> x,
                                   const NumericBracketOptions& options = {}, NumericBracketInfo* info = nullptr);

/// Largest column difference, each relative to max(1, |reference column|_inf).
double basis_disagreement(const BracketBasis& reference, const BracketBasis& other);

struct RankResult {
    std::size_t rank = 0;
    bool full = false;
    double min_ratio = 0.0; // smallest |R_ii| / |R_00| after column normalization
};

/// Default relative tolerance (n+1) * machine epsilon * 1e3.
double default_rank_tolerance(std::size_t columns);

/// Numerical rank of the column-normalized basis by column-pivoted QR; |R_ii| <= tol |R_00| counts as zero.
RankResult rank_check(const BracketBasis& basis, double tol);
RankResult rank_check(const BracketBasis& basis);

/// CSV table: sample, x1..xn, rank, full, min_ratio.
std::string rank_table_csv(std::span<const BracketBasis> bases, std::string_view comment = {});

} // namespace latticespin
