#include "latticespin/hormander.hpp"

#include "latticespin/csv.hpp"
#include "latticespin/errors.hpp"
#include "latticespin/jets.hpp"

#include <cmath>
#include <limits>

namespace latticespin {

namespace {

void require_homogeneous(const SpinChainModel& model, std::span<const double> x) {
    if (model.is_periodic()) throw UsageError("bracket basis requires a time-homogeneous model");
    if (x.size() != model.volume()) throw UsageError("state dimension does not match the model volume");
}

class AnalyticFields {
public:
    AnalyticFields(const SpinChainModel& model, std::size_t generators)
        : f_(model.drift()), a_(model.coefficients_at(0.0)), n_(model.volume()), g_(generators) {}

    std::vector<MultiDual> drift(const std::vector<MultiDual>& x) const {
        std::vector<MultiDual> out;
        out.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const auto jet = f_.jet(0.0, x[i].value(), static_cast<int>(x[i].active_generators()));
            MultiDual v = apply_jet(jet, x[i]);
            if (i > 0) v += a_.sub[i] * x[i - 1];
            if (i + 1 < n_) v += a_.super[i] * x[i + 1];
            out.push_back(std::move(v));
        }
        return out;
    }

    /// Depth-m bracket ad_{A0}^m A1 at x, using generators g.. for the nested derivatives.
    std::vector<MultiDual> bracket(std::size_t m, const std::vector<MultiDual>& x, std::size_t g) const {
        if (m == 0) {
            std::vector<MultiDual> e(n_, MultiDual(g_));
            e[0][0] = 1.0;
            return e;
        }
        const auto v = bracket(m - 1, x, g + 1);
        std::vector<MultiDual> y = x;
        for (std::size_t i = 0; i < n_; ++i) y[i] += v[i].times_generator(g);
        const auto dv = drift(y);

        const auto fx = drift(x);
        std::vector<MultiDual> z = x;
        for (std::size_t i = 0; i < n_; ++i) z[i] += fx[i].times_generator(g);
        const auto w = bracket(m - 1, z, g + 1);

        std::vector<MultiDual> out;
        out.reserve(n_);
        for (std::size_t i = 0; i < n_; ++i) out.push_back(dv[i].part(g) - w[i].part(g));
        return out;
    }

private:
    const LocalDrift& f_;
    ChainCoefficients a_;
    std::size_t n_;
    std::size_t g_;
};

Eigen::MatrixXd raw_fields(const SpinChainModel& model, std::span<const double> x) {
    const std::size_t n = x.size();
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n + 1), static_cast<Eigen::Index>(n + 1));
    const auto f = drift_vector(model, 0.0, x);
    b(0, 0) = 1.0;
    for (std::size_t i = 0; i < n; ++i) b(static_cast<Eigen::Index>(i + 1), 0) = f[i];
    if (n >= 1) b(1, 1) = 1.0;
    return b;
}

} // namespace

BracketBasis bracket_basis_analytic(const SpinChainModel& model, std::span<const double> x) {
    require_homogeneous(model, x);
    const std::size_t n = x.size();
    if (!model.drift().has_jet(static_cast<int>(n) - 1))
        throw StructuralError("bracket basis needs local drift derivatives up to order " + std::to_string(n - 1));

    BracketBasis basis{{x.begin(), x.end()}, raw_fields(model, x)};
    const std::size_t generators = n > 1 ? n - 1 : 0;
    const AnalyticFields fields(model, generators);
    std::vector<MultiDual> point;
    for (double v : x) point.emplace_back(generators, v);

    const auto a = model.coefficients_at(0.0);
    double pivot = 1.0;
    for (std::size_t m = 1; m < n; ++m) {
        const auto v = fields.bracket(m, point, 0);
        const auto col = static_cast<Eigen::Index>(m + 1);
        for (std::size_t i = 0; i < n; ++i) basis.columns(static_cast<Eigen::Index>(i + 1), col) = v[i].value();
        pivot *= a.sub[m];
        basis.columns(col, col) = pivot;
        for (Eigen::Index r = col + 1; r <= static_cast<Eigen::Index>(n); ++r) basis.columns(r, col) = 0.0;
    }
    return basis;
}

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

std::vector<double> nested_bracket(const SpinChainModel& model, std::size_t m, const std::vector<double>& x, double h) {
    const std::size_t n = x.size();
    if (m == 0) {
        std::vector<double> e(n, 0.0);
        e[0] = 1.0;
        return e;
    }
    // steps along v are h / max(1, |v|_inf) so the displacement never exceeds h
    const auto v = nested_bracket(model, m - 1, x, h);
    const double sv = h / std::max(1.0, max_abs(v));
    auto xp = x, xm = x;
    for (std::size_t i = 0; i < n; ++i) {
        xp[i] += sv * v[i];
        xm[i] -= sv * v[i];
    }
    const auto fp = drift_vector(model, 0.0, xp);
    const auto fm = drift_vector(model, 0.0, xm);

    const auto fx = drift_vector(model, 0.0, x);
    const double sf = h / std::max(1.0, max_abs(fx));
    for (std::size_t i = 0; i < n; ++i) {
        xp[i] = x[i] + sf * fx[i];
        xm[i] = x[i] - sf * fx[i];
    }
    const auto wp = nested_bracket(model, m - 1, xp, h);
    const auto wm = nested_bracket(model, m - 1, xm, h);

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (fp[i] - fm[i]) / (2.0 * sv) - (wp[i] - wm[i]) / (2.0 * sf);
    return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// The nested bracket with fourth-order central differences (five-point stencil) at every level.
std::vector<double> nested_bracket5(const SpinChainModel& model, std::size_t m, const std::vector<double>& x, double h) {
    const std::size_t n = x.size();
    if (m == 0) {
        std::vector<double> e(n, 0.0);
        e[0] = 1.0;
        return e;
    }
    const auto v = nested_bracket5(model, m - 1, x, h);
    const double sv = h / std::max(1.0, max_abs(v));
    const auto fx = drift_vector(model, 0.0, x);
    const double sf = h / std::max(1.0, max_abs(fx));
    constexpr double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
    constexpr double weights[4] = {1.0, -8.0, 8.0, -1.0};
    std::vector<double> out(n, 0.0), xv(n), xf(n);
    for (int j = 0; j < 4; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            xv[i] = x[i] + offsets[j] * sv * v[i];
            xf[i] = x[i] + offsets[j] * sf * fx[i];
        }
        const auto fv = drift_vector(model, 0.0, xv);
        const auto wf = nested_bracket5(model, m - 1, xf, h);
        for (std::size_t i = 0; i < n; ++i) out[i] += weights[j] * (fv[i] / (12.0 * sv) - wf[i] / (12.0 * sf));
    }
    return out;
}

} // namespace

BracketBasis bracket_basis_numeric(const SpinChainModel& model, std::span<const double> x,
                                   const NumericBracketOptions& options, NumericBracketInfo* info) {
    require_homogeneous(model, x);
    if (!(options.fd_step > 0.0)) throw UsageError("fd_step must be positive");
    const std::size_t n = x.size();
    BracketBasis basis{{x.begin(), x.end()}, raw_fields(model, x)};
    NumericBracketInfo local;
    local.laddered.assign(n + 1, false);
    local.step.assign(n + 1, 0.0);
    const std::vector<double> point(x.begin(), x.end());

    for (std::size_t m = 1; m < n; ++m) {
        double h = options.fd_step;
        auto col = nested_bracket(model, m, point, h);
        const auto half = nested_bracket(model, m, point, h / 2.0);
        const double scale = std::max(1.0, max_abs(col));
        const double plain_error = max_diff(col, half);

        // step ladder h0 * 2^(k/2) of five-point columns; the rung that moves least against the next one, with that change as its error estimate
        std::vector<double> best, prev = nested_bracket5(model, m, point, h);
        double best_change = std::numeric_limits<double>::infinity(), best_h = h;
        for (int k = 1; k <= 52; ++k) {
            const double hk = options.fd_step * std::pow(std::sqrt(2.0), k);
            const auto next = nested_bracket5(model, m, point, hk);
            const double change = max_diff(prev, next);
            if (change < best_change) {
                best_change = change;
                best = prev;
                best_h = hk / std::sqrt(2.0);
            }
            prev = next;
        }
        if (plain_error > options.agreement * scale || best_change < plain_error) {
            col = best;
            h = best_h;
            local.laddered[m + 1] = true;
        }
        for (double v : col)
            if (!std::isfinite(v)) throw NumericalError("non-finite bracket difference quotient");
        local.step[m + 1] = h;
        for (std::size_t i = 0; i < n; ++i) basis.columns(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(m + 1)) = col[i];
    }
    if (info) *info = std::move(local);
    return basis;
}

double default_rank_tolerance(std::size_t columns) {
    return static_cast<double>(columns) * std::numeric_limits<double>::epsilon() * 1e3;
}

RankResult rank_check(const BracketBasis& basis) { return rank_check(basis, default_rank_tolerance(static_cast<std::size_t>(basis.columns.cols()))); }

RankResult rank_check(const BracketBasis& basis, double tol) {
    if (!(tol > 0.0)) throw UsageError("rank tolerance must be positive");
    Eigen::MatrixXd b = basis.columns;
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
        const double norm = b.col(j).norm();
        if (norm > 0.0) b.col(j) /= norm;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
    qr.setThreshold(tol);
    RankResult r;
    r.rank = static_cast<std::size_t>(qr.rank());
    r.full = r.rank == static_cast<std::size_t>(b.cols());
    const auto& R = qr.matrixQR();
    const double top = std::abs(R(0, 0));
    r.min_ratio = top > 0.0 ? 1.0 : 0.0;
    for (Eigen::Index i = 1; i < b.cols() && top > 0.0; ++i) r.min_ratio = std::min(r.min_ratio, std::abs(R(i, i)) / top);
    return r;
}

std::string rank_table_csv(std::span<const BracketBasis> bases, std::string_view comment) {
    const std::size_t n = bases.empty() ? 0 : bases.front().volume();
    std::vector<std::string> header{"sample"};
    for (std::size_t i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i));
    header.insert(header.end(), {"rank", "full", "min_ratio"});
    CsvBuilder csv(header, comment);
    for (std::size_t s = 0; s < bases.size(); ++s) {
        const auto r = rank_check(bases[s]);
        std::vector<CsvField> row{static_cast<std::int64_t>(s)};
        for (double v : bases[s].state) row.emplace_back(v);
        row.emplace_back(static_cast<std::int64_t>(r.rank));
        row.emplace_back(static_cast<std::int64_t>(r.full ? 1 : 0));
        row.emplace_back(r.min_ratio);
        csv.row(row);
    }
    return csv.str();
}

double basis_disagreement(const BracketBasis& reference, const BracketBasis& other) {
    if (reference.columns.rows() != other.columns.rows() || reference.columns.cols() != other.columns.cols())
        throw UsageError("basis_disagreement: bases differ in shape");
    double worst = 0.0;
    for (Eigen::Index c = 0; c < reference.columns.cols(); ++c) {
        const double scale = std::max(1.0, reference.columns.col(c).cwiseAbs().maxCoeff());
        worst = std::max(worst, (reference.columns.col(c) - other.columns.col(c)).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

} // namespace latticespin
