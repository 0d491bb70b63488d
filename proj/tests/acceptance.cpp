// Acceptance run: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include "latticespin/control.hpp"
#include "latticespin/ergodics.hpp"
#include "latticespin/hormander.hpp"
#include "latticespin/lyapunov.hpp"
#include "latticespin/periodic.hpp"
#include "latticespin/random.hpp"
#include "latticespin/runner.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace latticespin;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(LATTICESPIN_SOURCE_DIR) / "configs";

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED ") + what;
    }
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "latticespin_acceptance" / name;
    fs::remove_all(dir);
    return dir;
}

const DriftConstants kLinearConstants{0.1, 1.0, 1.0, 1.0};
const DriftConstants kCubicConstants{1.0, 1.0, 3.0, 1.0};

SpinChainModel linear_chain(std::size_t n, double a, double slope = -1.0, DriftConstants c = kLinearConstants) {
    return {LocalDrift::linear(slope, c), CouplingCoefficients::constant(a, a), n};
}

SpinChainModel cubic_chain(std::size_t n, double a) {
    return {LocalDrift::cubic(1.0, 1.0, kCubicConstants), CouplingCoefficients::constant(a, a), n};
}

/// Finite witness entries of the failing rows of a validation table.
bool failing_rows_have_finite_witness(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    bool any = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("id,", 0) == 0) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (cells.size() < 4 || cells[1] != "0") continue;
        std::istringstream ws(cells[3]);
        std::size_t count = 0;
        for (double v; ws >> v; ++count)
            if (!std::isfinite(v)) return false;
        if (count == 0) return false;
        any = true;
    }
    return any;
}

// 1
Outcome assumption_gate() {
    Outcome o;
    for (const auto& [name, expected] : {std::pair{"validate_linear", kExitOk}, {"validate_cubic", kExitOk},
                                         {"validate_unstable", kExitValidation}}) {
        const auto dir = scratch(name);
        const auto t0 = std::chrono::steady_clock::now();
        const auto r = run_config_file(kConfigs / (std::string(name) + ".json"), {dir, {}});
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(r.exit_code == expected, fmt("%s exit %d", name, r.exit_code));
        o.require(secs < 1.0, fmt("%s %.3fs", name, secs));
        if (expected != kExitOk)
            o.require(failing_rows_have_finite_witness(slurp(dir / "validation.csv")), std::string(name) + " finite witness");
    }
    return o;
}

// 2
Outcome lyapunov_drift() {
    Outcome o;
    for (std::size_t n : {2, 4, 8}) {
        const auto model = linear_chain(n, 0.2);
        const auto spec = LyapunovSpec::unit();
        const auto k = auto_constants(model, spec);
        if (!k.constants) {
            o.require(false, fmt("n=%zu no closed-form constants", n));
            continue;
        }
        const double eta = kLinearConstants.eta;
        const bool closed = k.constants->c == 1.0 && std::abs(k.constants->C - (2.0 * n * eta + 2.0)) < 1e-12;
        LyapunovSampling s;
        s.count = 10000;
        s.seed = n;
        const auto base = drift_condition_check(model, spec, k.constants->c, k.constants->C, s);
        const auto hot = drift_condition_check(model, spec, 10.0 * k.constants->c, k.constants->C, s);
        bool finite = !hot.witness.empty();
        for (double v : hot.witness) finite = finite && std::isfinite(v);
        o.require(closed && base.pass && !hot.pass && finite,
                  fmt("n=%zu C=%.2f max_violation %.3g, 10c max_violation %.3g", n, k.constants->C, base.max_violation,
                      hot.max_violation));
    }
    return o;
}

// 3
Outcome hormander_rank() {
    Outcome o;
    for (std::size_t n : {2, 3, 5}) {
        for (bool cubic : {true, false}) {
            const auto model = cubic ? cubic_chain(n, 0.2) : linear_chain(n, 0.2);
            std::size_t full = 0, dropped = 0, checks = 0;
            double gap = 0.0;
            for (std::size_t s = 0; s < 100; ++s) {
                std::vector<double> x(n);
                CounterRng(31, s).fill_normal(0, x, 1.0);
                const auto basis = bracket_basis_analytic(model, x);
                full += rank_check(basis).full;
                gap = std::max(gap, basis_disagreement(basis, bracket_basis_numeric(model, x)));
                for (std::size_t site = 2; site <= n; ++site) {
                    const auto zeroed = model.with_coupling(model.coupling().with_zeroed_sub(static_cast<int>(site)));
                    dropped += rank_check(bracket_basis_analytic(zeroed, x)).rank < n + 1;
                    ++checks;
                }
            }
            const double tol = cubic ? 1e-5 : 1e-8;
            o.require(full == 100 && dropped == checks && gap <= tol,
                      fmt("n=%zu %s full %zu/100 dropped %zu/%zu disagreement %.2e", n, cubic ? "cubic" : "linear", full,
                          dropped, checks, gap));
        }
    }
    return o;
}

// 4
Outcome steering() {
    Outcome o;
    const auto model = cubic_chain(3, 1.0);
    const std::vector<double> x{1.0, 0.0, -1.0}, z{0.0, 1.0, 0.0};
    const double T = 2.0;
    const auto plan = plan_steering(model, x, z, T);
    const auto& y = plan.states();
    const std::size_t last = plan.grid().size() - 1;
    double endpoint = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        endpoint = std::max({endpoint, std::abs(y[i] - x[i]), std::abs(y[last * 3 + i] - z[i])});
    const double e1 = verify_steering(model, x, z, T, plan, 1e-4);
    const double e2 = verify_steering(model, x, z, T, plan, 5e-5);
    o.require(e1 <= 1e-6, fmt("error %.3e at rk_step 1e-4", e1));
    o.require(e1 >= 8.0 * e2, fmt("halving ratio %.3g (error %.3e at 5e-5)", e1 / e2, e2));
    o.require(endpoint <= 1e-8, fmt("endpoint %.2e", endpoint));
    return o;
}

// 5
Outcome volume_limit() {
    Outcome o;
    const std::vector<std::size_t> volumes{6, 12, 24};
    const PaddedSequence x(std::vector<double>(24, 1.0));
    EnsembleOptions eo;
    eo.h = 0.01;
    const auto vc = volume_convergence(linear_chain(24, 0.1), 3, volumes, x, 1.0, 10000, 5, eo);
    const double d6 = vc.at(0, 2), d12 = vc.at(1, 2);
    const double se = std::hypot(vc.se_at(0, 2), vc.se_at(1, 2));
    o.require(d6 - d12 >= 3.0 * se, fmt("D[6][24] %.3e D[12][24] %.3e combined SE %.2e", d6, d12, se));
    bool diag = true;
    for (std::size_t a = 0; a < 3; ++a) diag = diag && vc.at(a, a) == 0.0;
    o.require(diag, "D[n][n] == 0");
    return o;
}

// 6
Outcome decay_rate() {
    Outcome o;
    DecayOptions opts;
    opts.ensemble.h = 0.01;
    {
        const std::vector<double> x{2.0}, y{-2.0};
        std::vector<double> times;
        for (int k = 2; k <= 8; ++k) times.push_back(0.5 * k);
        const auto fit = ergodic_decay(linear_chain(1, 0.1), x, y, times, 100000, 2024, opts);
        std::vector<double> used, exact;
        for (std::size_t j = 0; j < times.size(); ++j)
            if (fit.tv[j] > fit.floors[j]) {
                used.push_back(times[j]);
                exact.push_back(oracle::ou_tv(2.0, -2.0, times[j]));
            }
        const auto reference = fit_decay(used, exact, 0.0);
        const bool ok = fit.alpha && reference.alpha && std::abs(*fit.alpha - *reference.alpha) <= 0.5 * *reference.alpha &&
                        fit.r2 >= 0.9;
        o.require(ok, fmt("OU alpha %.4f oracle %.4f r2 %.3f points %zu", fit.alpha.value_or(NAN),
                          reference.alpha.value_or(NAN), fit.r2, fit.points_used));
    }
    {
        const std::vector<double> x(4, 2.0), y(4, -2.0);
        std::vector<double> times;
        for (int k = 1; k <= 12; ++k) times.push_back(0.5 * k);
        const auto fit = ergodic_decay(cubic_chain(4, 0.2), x, y, times, 100000, 2025, opts);
        o.require(fit.alpha && *fit.alpha > 0.0 && fit.r2 >= 0.9,
                  fmt("cubic n=4 alpha %.4f r2 %.3f points %zu", fit.alpha.value_or(NAN), fit.r2, fit.points_used));
    }
    return o;
}

// 7
Outcome invariant_variance() {
    Outcome o;
    InvariantOptions io;
    io.burn_in = 20.0;
    io.n_samples = 20000;
    io.thinning = 0.5;
    io.h = 0.002;
    io.seed = 71;
    const auto ou = estimate_invariant(linear_chain(1, 0.1), io);
    o.require(std::abs(ou.variance(1) - 0.5) <= 3.0 * ou.variance_se(1),
              fmt("n=1 variance %.4f se %.4f", ou.variance(1), ou.variance_se(1)));

    io.seed = 72;
    const auto chain = estimate_invariant(linear_chain(3, 0.2), io);
    const auto S = oracle::stationary_covariance(oracle::linear_chain_matrix(3, -1.0, 0.2));
    for (std::size_t i = 1; i <= 3; ++i)
        o.require(std::abs(chain.variance(i) - S(i - 1, i - 1)) <= 3.0 * chain.variance_se(i),
                  fmt("n=3 site %zu variance %.4g oracle %.4g se %.2g", i, chain.variance(i), S(i - 1, i - 1),
                      chain.variance_se(i)));
    return o;
}

// 8
Outcome tails_tightness() {
    Outcome o;
    const DriftConstants c{0.1, 2.0, 1.0, 2.0};
    const auto model = linear_chain(32, 0.1, -2.0, c);
    WeightFamily w = WeightFamily::exponential(0.5);
    w.v = SiteWeight::exponential(0.25);
    const std::vector<std::size_t> volumes{32}, ladder{2, 4, 8, 16};
    EnsembleOptions eo;
    eo.h = 0.01;
    const auto table = tail_bound_check(model, volumes, PaddedSequence(std::vector<double>(32, 1.0)), 2.0, ladder, w.rho,
                                        2000, 9, eo);
    bool decreasing = true;
    for (std::size_t j = 1; j < table.rows.size(); ++j)
        decreasing = decreasing && table.rows[j].estimate < table.rows[j - 1].estimate;
    const auto& first = table.rows.front();
    const auto& last = table.rows.back();
    const double se = std::hypot(first.se, last.se);
    o.require(decreasing && first.estimate - last.estimate >= 3.0 * se,
              fmt("tail N0=2 %.3e N0=16 %.3e combined SE %.2e", first.estimate, last.estimate, se));

    std::vector<EmpiricalMeasure> measures;
    for (std::size_t n : {4, 8, 16}) {
        InvariantOptions io;
        io.burn_in = 10.0;
        io.n_samples = 2000;
        io.thinning = 0.5;
        io.seed = 80 + n;
        measures.push_back(estimate_invariant(model.with_volume(n), io));
    }
    std::vector<const EmpiricalMeasure*> ptrs;
    for (const auto& m : measures) ptrs.push_back(&m);
    const std::vector<double> eps{0.5, 0.2, 0.1, 0.05};
    double worst = -INFINITY;
    bool within = true;
    for (const auto& row : tightness_diagnostic(ptrs, w, c, eps)) {
        within = within && row.sup_mass <= row.eps;
        worst = std::max(worst, row.sup_mass - row.eps);
    }
    o.require(within, fmt("tightness max(mass - eps) %.3g", worst));
    return o;
}

// 9
Outcome periodic_measures() {
    Outcome o;
    const LocalDrift ou = LocalDrift::linear(-1.0, kLinearConstants);
    {
        const SpinChainModel flat(ou, CouplingCoefficients::constant(0.5, 0.5), 2);
        const SpinChainModel degenerate(ou, CouplingCoefficients::sinusoidal(0.5, 0.0, 0.5, 0.0, 1.0), 2);
        PeriodicOptions po;
        po.cycles = 20000;
        po.seed = 91;
        const auto periodic = estimate_periodic_measure(degenerate, 0.0, po);
        InvariantOptions io;
        io.burn_in = 20.0;
        io.n_samples = 20000;
        io.seed = 92;
        const auto invariant = estimate_invariant(flat, io);
        for (std::size_t i = 1; i <= 2; ++i) {
            const double dm = std::abs(periodic.mean(i) - invariant.mean(i));
            const double sm = std::hypot(periodic.moment_se(i, 1), invariant.moment_se(i, 1));
            const double dv = std::abs(periodic.variance(i) - invariant.variance(i));
            const double sv = std::hypot(periodic.variance_se(i), invariant.variance_se(i));
            o.require(dm <= 3.0 * sm && dv <= 3.0 * sv,
                      fmt("degenerate site %zu |dmean| %.4f (3SE %.4f) |dvar| %.4f (3SE %.4f)", i, dm, 3 * sm, dv, 3 * sv));
        }
    }
    {
        const SpinChainModel model(LocalDrift::linear(-2.0, {0.1, 2.0, 1.0, 2.0}),
                                   CouplingCoefficients::sinusoidal(0.375, 0.8667, 0.1, 0.0, 2.0), 2);
        PeriodicOptions po;
        po.burn_cycles = 10;
        po.cycles = 100000;
        po.seed = 93;
        const auto mu0 = estimate_periodic_measure(model, 0.0, po);
        const auto mu1 = estimate_periodic_measure(model, 1.0, po);
        std::vector<const EmpiricalMeasure*> both{&mu0, &mu1};
        const auto bins = shared_binning(both);
        const auto a = mu0.rebinned(bins);
        const auto b = mu1.rebinned(bins);
        const double gap = tv_distance(a, b);
        const double floor = noise_floor(a.sample_count(), b.sample_count());
        o.require(gap > 3.0 * floor, fmt("mu_0 vs mu_T/2 tv %.4f floor %.4f", gap, floor));

        EnsembleOptions eo;
        eo.h = 0.01;
        const auto tr = transport_check(model, 0.0, 2.0, a, a, 100000, 94, eo);
        o.require(tr.gap < 2.0 * tr.floor,
                  fmt("transport(0, T) gap %.4f floor %.4f null bias %.4f", tr.gap, tr.floor, tr.null_bias));
    }
    return o;
}

// 10
Outcome determinism() {
    Outcome o;
    std::size_t files = 0, configs = 0;
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(kConfigs))
        if (e.path().extension() == ".json") paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) {
        const auto name = p.stem().string();
        const auto a = run_config_file(p, {scratch("a_" + name), {}});
        const auto b = run_config_file(p, {scratch("b_" + name), {}});
        bool same = a.exit_code == b.exit_code && a.summary["files"] == b.summary["files"];
        for (const auto& f : a.summary["files"]) {
            const auto file = f.get<std::string>();
            same = same && slurp(a.out_dir / file) == slurp(b.out_dir / file);
            ++files;
        }
        ++configs;
        if (!same) o.require(false, name + " differs between runs");
    }
    o.require(o.pass, fmt("%zu configs, %zu tables byte-identical", configs, files));
    return o;
}

struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"assumption gate", 3.0, assumption_gate},
        {"lyapunov drift condition", 5.0, lyapunov_drift},
        {"hormander bracket rank", 10.0, hormander_rank},
        {"controllability", 30.0, steering},
        {"finite-volume convergence", 300.0, volume_limit},
        {"geometric ergodicity", 600.0, decay_rate},
        {"invariant measure", 120.0, invariant_variance},
        {"tails and tightness", 300.0, tails_tightness},
        {"periodic measures", 600.0, periodic_measures},
        {"determinism", 1e9, determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("threw: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) o.require(false, fmt("runtime %.1fs over %.0fs", secs, c.budget_s));
        failed += !o.pass;
        std::printf("%s %2zu %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", i + 1, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
