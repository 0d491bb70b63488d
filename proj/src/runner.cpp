#include "latticespin/runner.hpp"

#include "latticespin/control.hpp"
#include "latticespin/csv.hpp"
#include "latticespin/ergodics.hpp"
#include "latticespin/errors.hpp"
#include "latticespin/format.hpp"
#include "latticespin/hormander.hpp"
#include "latticespin/kernels.hpp"
#include "latticespin/lyapunov.hpp"
#include "latticespin/model.hpp"
#include "latticespin/periodic.hpp"
#include "latticespin/random.hpp"
#include "latticespin/sim.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#ifndef LATTICESPIN_VERSION
#define LATTICESPIN_VERSION "0.0.0"
#endif

namespace latticespin {

namespace {

using nlohmann::json;

/// A config that passed the schema but is inconsistent in a way only the model can tell.
struct ConfigProblem : std::runtime_error {
    ConfigProblem(std::string p, const std::string& message) : std::runtime_error(message), path(std::move(p)) {}
    std::string path;
};

double num(const json& j, const char* key, double fallback) { return j.contains(key) ? j.at(key).get<double>() : fallback; }

std::size_t count(const json& j, const char* key, std::size_t fallback) {
    return j.contains(key) ? static_cast<std::size_t>(j.at(key).get<double>()) : fallback;
}

std::vector<double> vec(const json& j, const char* key) {
    return j.contains(key) ? j.at(key).get<std::vector<double>>() : std::vector<double>{};
}

std::vector<std::size_t> sizes(const json& j, const char* key) {
    std::vector<std::size_t> out;
    for (const auto& v : j.at(key)) out.push_back(static_cast<std::size_t>(v.get<double>()));
    return out;
}

Scheme scheme_of(const json& j) { return j.value("scheme", std::string("euler")) == "tamed" ? Scheme::tamed : Scheme::euler; }

EnsembleOptions ensemble_of(const json& j) {
    EnsembleOptions eo;
    eo.h = num(j, "h", 0.01);
    eo.scheme = scheme_of(j);
    eo.backend = j.value("backend", std::string("openmp")) == "serial" ? Backend::serial : Backend::openmp;
    return eo;
}

std::vector<double> state_or_zero(const json& j, const char* key, std::size_t n, const std::string& path) {
    auto x = vec(j, key);
    if (x.empty()) return std::vector<double>(n, 0.0);
    if (x.size() != n)
        throw ConfigProblem(path + "/" + key, "has " + std::to_string(x.size()) + " entries, volume is " + std::to_string(n));
    return x;
}

std::vector<double> state_exact(const json& j, const char* key, std::size_t n, const std::string& path) {
    auto x = vec(j, key);
    if (x.size() != n)
        throw ConfigProblem(path + "/" + key, "has " + std::to_string(x.size()) + " entries, volume is " + std::to_string(n));
    return x;
}

double need(const json& j, const char* key, const std::string& path, const std::string& why) {
    if (!j.contains(key)) throw ConfigProblem(path + "/" + key, "is required " + why);
    return j.at(key).get<double>();
}

LocalDrift build_drift(const json& d) {
    const std::string path = "/model/drift";
    const auto& c = d.at("constants");
    const DriftConstants constants{c.at("eta").get<double>(), c.at("lambda").get<double>(), c.at("theta").get<double>(),
                                   c.at("eta0").get<double>()};
    const std::string kind = d.at("kind").get<std::string>();
    std::optional<LocalDrift> f;
    if (kind == "linear") f = LocalDrift::linear(need(d, "slope", path, "for a linear drift"), constants);
    else if (kind == "cubic")
        f = LocalDrift::cubic(need(d, "alpha", path, "for a cubic drift"), need(d, "beta", path, "for a cubic drift"), constants);
    else
        f = LocalDrift::tanh_saturated(need(d, "gamma", path, "for a tanh drift"), need(d, "kappa", path, "for a tanh drift"),
                                       constants);
    if (d.contains("forcing")) {
        const auto& fo = d.at("forcing");
        f = f->with_forcing(fo.at("amplitude").get<double>(), fo.at("period").get<double>(), num(fo, "phase", 0.0));
    }
    return *f;
}

CouplingCoefficients build_coupling(const json& c) {
    const std::string path = "/model/coupling";
    const std::string kind = c.at("kind").get<std::string>();
    std::optional<double> bound;
    if (c.contains("bound")) bound = c.at("bound").get<double>();
    auto scalar = [&](const char* key) {
        if (!c.contains(key)) throw ConfigProblem(path + "/" + key, "is required for " + kind + " coupling");
        if (!c.at(key).is_number()) throw ConfigProblem(path + "/" + key, "must be a number for " + kind + " coupling");
        return c.at(key).get<double>();
    };
    if (kind == "constant") return CouplingCoefficients::constant(scalar("sub"), scalar("super"), bound);
    if (kind == "sinusoidal")
        return CouplingCoefficients::sinusoidal(scalar("sub"), num(c, "sub_amp", 0.0), scalar("super"), num(c, "super_amp", 0.0),
                                                need(c, "period", path, "for sinusoidal coupling"), num(c, "phase", 0.0), bound);
    auto list = [&](const char* key) {
        if (!c.contains(key) || !c.at(key).is_array() || c.at(key).empty())
            throw ConfigProblem(path + "/" + key, "must be a nonempty array for table coupling");
        return c.at(key).get<std::vector<double>>();
    };
    return CouplingCoefficients::table(list("sub"), list("super"), bound);
}

SiteWeight build_site_weight(const json& w, const std::string& path) {
    const std::string kind = w.at("kind").get<std::string>();
    if (kind == "exponential") return SiteWeight::exponential(need(w, "kappa", path, "for exponential weights"));
    if (kind == "polynomial")
        return SiteWeight::polynomial(need(w, "exponent", path, "for polynomial weights"), num(w, "kappa", 1.0));
    if (!w.contains("values")) throw ConfigProblem(path + "/values", "is required for table weights");
    return SiteWeight::table(w.at("values").get<std::vector<double>>());
}

WeightFamily build_weights(const json& config) {
    if (!config.contains("weights")) return WeightFamily::exponential(1.0);
    const auto& w = config.at("weights");
    const int range = static_cast<int>(count(w, "range", 1));
    WeightFamily fam;
    if (!w.contains("rho") || w.at("rho").value("kind", std::string()) == "exponential") {
        const double kappa = w.contains("rho") ? need(w.at("rho"), "kappa", "/weights/rho", "for exponential weights") : 1.0;
        fam = WeightFamily::exponential(kappa, range);
    } else {
        fam.rho = build_site_weight(w.at("rho"), "/weights/rho");
        fam.ratio_range = range;
        fam.ratio_bound = need(w, "ratio_bound", "/weights", "for non-exponential rho");
        fam.lower_rate.reset();
        fam.lower_scale.reset();
        fam.sup_ratio_bound.reset();
    }
    if (w.contains("ratio_bound")) fam.ratio_bound = w.at("ratio_bound").get<double>();
    if (w.contains("v")) fam.v = build_site_weight(w.at("v"), "/weights/v");
    if (w.contains("lower_rate")) fam.lower_rate = w.at("lower_rate").get<double>();
    if (w.contains("lower_scale")) fam.lower_scale = w.at("lower_scale").get<double>();
    if (w.contains("sup_ratio_bound")) fam.sup_ratio_bound = w.at("sup_ratio_bound").get<double>();
    return fam;
}

SpinChainModel build_model(const json& config) {
    const auto& m = config.at("model");
    return SpinChainModel(build_drift(m.at("drift")), build_coupling(m.at("coupling")), count(m, "volume", 1));
}

std::string join(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt17(v[i]);
    return s;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// Collects output files and the headline of one experiment.
struct Context {
    const json& config;
    const SpinChainModel& model;
    const WeightFamily& weights;
    std::uint64_t seed;
    std::filesystem::path dir;
    std::string comment;
    std::vector<std::string> files;
    json headline = json::object();
    int exit_code = kExitOk;
    std::vector<ConfigIssue> errors;

    void emit(const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        files.push_back(name);
    }
    /// Prepends the provenance comment to a table that was built without one.
    void emit_table(const std::string& name, const std::string& csv) { emit(name, "# " + comment + "\n" + csv); }
};

std::string validation_csv(const AssumptionReport& report, std::string_view comment) {
    CsvBuilder csv({"id", "pass", "worst_margin", "witness", "detail"}, comment);
    for (const auto& c : report.conditions)
        csv.row({c.id, std::int64_t{c.pass ? 1 : 0}, c.worst_margin, join(c.witness), c.detail});
    return csv.str();
}

json failing_ids(const AssumptionReport& report) {
    json ids = json::array();
    for (const auto& c : report.conditions)
        if (!c.pass) ids.push_back(c.id);
    return ids;
}

void run_validate(Context& ctx, const json& p) {
    SamplingGrid grid;
    grid.z_max = num(p, "z_max", grid.z_max);
    grid.z_points = count(p, "z_points", grid.z_points);
    grid.t_points = count(p, "t_points", grid.t_points);
    grid.sites = count(p, "sites", grid.sites);
    const auto report = validate_assumptions(ctx.model, ctx.weights, grid);
    ctx.emit("validation.csv", validation_csv(report, ctx.comment));
    ctx.headline["pass"] = report.pass();
    ctx.headline["conditions"] = report.conditions.size();
    ctx.headline["failed"] = failing_ids(report);
    if (!report.pass()) {
        ctx.exit_code = kExitValidation;
        for (const auto& c : report.conditions)
            if (!c.pass) ctx.errors.push_back({"/model", c.id + " fails at witness (" + join(c.witness) + ")"});
    }
}

void run_simulate(Context& ctx, const json& p) {
    const std::size_t n = ctx.model.volume();
    const auto x0 = state_or_zero(p, "x0", n, "/experiment/simulate");
    const double h = num(p, "h", 0.01);
    const auto noise = make_noise(ctx.seed, h, p.at("horizon").get<double>(), count(p, "stream", 0));
    const double start = num(p, "start_time", 0.0);
    Trajectory path;
    if (ctx.model.is_periodic()) {
        auto lifted = simulate_lifted(ctx.model, x0, start, noise, scheme_of(p));
        ctx.emit_table("trajectory.csv", lifted_csv(lifted));
        path = std::move(lifted.path);
    } else {
        path = simulate(ctx.model, x0, noise, scheme_of(p), start);
        ctx.emit_table("trajectory.csv", trajectory_csv(path));
    }
    const auto last = path.final_state();
    double norm2 = 0.0;
    for (double v : last) norm2 += v * v;
    ctx.headline["steps"] = path.size() - 1;
    ctx.headline["blowup"] = path.blowup;
    ctx.headline["final_norm"] = finite_or_null(std::sqrt(norm2));
    if (path.blowup) {
        ctx.exit_code = kExitBlowup;
        ctx.errors.push_back({"/experiment/simulate", "the path blew up at t = " + fmt17(path.times.back())});
    }
}

std::string moments_csv(const EmpiricalMeasure& mu, std::string_view comment) {
    CsvBuilder csv({"site", "mean", "mean_se", "variance", "variance_se", "second_moment", "fourth_moment"}, comment);
    for (std::size_t i = 1; i <= mu.volume(); ++i)
        csv.row({static_cast<std::int64_t>(i), mu.mean(i), mu.moment_se(i, 1), mu.variance(i), mu.variance_se(i),
                 mu.moment(i, 2.0), mu.moment(i, 4.0)});
    return csv.str();
}

void run_invariant(Context& ctx, const json& p) {
    InvariantOptions io;
    io.burn_in = num(p, "burn_in", io.burn_in);
    io.n_samples = count(p, "n_samples", io.n_samples);
    io.thinning = num(p, "thinning", io.thinning);
    io.h = num(p, "h", io.h);
    io.scheme = scheme_of(p);
    io.seed = ctx.seed;
    io.x0 = state_or_zero(p, "x0", ctx.model.volume(), "/experiment/invariant");
    const auto mu = estimate_invariant(ctx.model, io);
    std::vector<Binning> bins;
    const EmpiricalMeasure* one[] = {&mu};
    bins = shared_binning(one, count(p, "bins", kDefaultBins));
    const auto binned = mu.rebinned(bins);
    ctx.emit("invariant_moments.csv", moments_csv(binned, ctx.comment));
    ctx.emit("invariant_histogram.csv", histogram_csv(binned, ctx.comment));
    json mean = json::array(), var = json::array(), se = json::array();
    for (std::size_t i = 1; i <= mu.volume(); ++i) {
        mean.push_back(mu.mean(i));
        var.push_back(mu.variance(i));
        se.push_back(mu.variance_se(i));
    }
    ctx.headline["samples"] = mu.sample_count();
    ctx.headline["mean"] = mean;
    ctx.headline["variance"] = var;
    ctx.headline["variance_se"] = se;
}

void run_decay(Context& ctx, const json& p) {
    const std::size_t n = ctx.model.volume();
    const auto x = state_exact(p, "x", n, "/experiment/decay");
    const auto y = state_exact(p, "y", n, "/experiment/decay");
    const auto times = vec(p, "times");
    DecayOptions opts;
    opts.ensemble = ensemble_of(p);
    opts.bins = count(p, "bins", kDefaultBins);
    const auto fit = ergodic_decay(ctx.model, x, y, times, count(p, "replicas", 1), ctx.seed, opts);
    CsvBuilder csv({"t", "tv", "floor", "used"}, ctx.comment);
    for (std::size_t j = 0; j < fit.times.size(); ++j)
        csv.row({fit.times[j], fit.tv[j], fit.floors[j], std::int64_t{fit.tv[j] > fit.floors[j] ? 1 : 0}});
    ctx.emit("decay.csv", csv.str());
    ctx.headline["alpha"] = fit.alpha ? json(*fit.alpha) : json(nullptr);
    ctx.headline["alpha_se"] = fit.alpha_se;
    ctx.headline["r2"] = fit.r2;
    ctx.headline["points_used"] = fit.points_used;
    ctx.headline["already_mixed"] = fit.already_mixed;
    ctx.headline["floor"] = fit.floor;
}

void run_converge(Context& ctx, const json& p) {
    const auto volumes = sizes(p, "volumes");
    const PaddedSequence x(vec(p, "x"));
    const auto res = volume_convergence(ctx.model, count(p, "k", 1), volumes, x, p.at("T1").get<double>(),
                                        count(p, "replicas", 1), ctx.seed, ensemble_of(p));
    CsvBuilder csv({"n", "m", "d", "se"}, ctx.comment);
    json d = json::array(), se = json::array();
    for (std::size_t a = 0; a < volumes.size(); ++a) {
        json drow = json::array(), srow = json::array();
        for (std::size_t b = 0; b < volumes.size(); ++b) {
            csv.row({static_cast<std::int64_t>(volumes[a]), static_cast<std::int64_t>(volumes[b]), res.at(a, b), res.se_at(a, b)});
            drow.push_back(res.at(a, b));
            srow.push_back(res.se_at(a, b));
        }
        d.push_back(drow);
        se.push_back(srow);
    }
    ctx.emit("converge.csv", csv.str());
    ctx.headline["volumes"] = volumes;
    ctx.headline["d"] = d;
    ctx.headline["se"] = se;
}

void run_tails(Context& ctx, const json& p) {
    const auto volumes = sizes(p, "volumes");
    const auto n0 = sizes(p, "n0");
    const PaddedSequence x(vec(p, "x"));
    const auto table = tail_bound_check(ctx.model, volumes, x, p.at("t").get<double>(), n0, ctx.weights.rho,
                                        count(p, "replicas", 1), ctx.seed, ensemble_of(p));
    CsvBuilder csv({"volume", "n0", "estimate", "se"}, ctx.comment);
    for (const auto& r : table.rows)
        csv.row({static_cast<std::int64_t>(r.volume), static_cast<std::int64_t>(r.n0), r.estimate, r.se});
    ctx.emit("tails.csv", csv.str());
    json sup = json::array();
    for (std::size_t k : n0) {
        const auto [est, se] = table.sup_over_volumes(k);
        sup.push_back({{"n0", k}, {"estimate", est}, {"se", se}});
    }
    ctx.headline["sup_over_volumes"] = sup;

    if (!p.contains("tightness")) return;
    const auto& tp = p.at("tightness");
    if (!ctx.weights.v) throw ConfigProblem("/weights/v", "is required for the tightness diagnostic");
    std::vector<EmpiricalMeasure> measures;
    const auto tv = sizes(tp, "volumes");
    for (std::size_t j = 0; j < tv.size(); ++j) {
        InvariantOptions io;
        io.burn_in = num(tp, "burn_in", io.burn_in);
        io.n_samples = count(tp, "n_samples", io.n_samples);
        io.thinning = num(tp, "thinning", io.thinning);
        io.h = num(tp, "h", io.h);
        io.seed = derive_seed(ctx.seed, 100 + j);
        measures.push_back(estimate_invariant(ctx.model.with_volume(tv[j]), io));
    }
    std::vector<const EmpiricalMeasure*> ptrs;
    for (const auto& m : measures) ptrs.push_back(&m);
    const auto eps = vec(tp, "eps");
    const auto rows = tightness_diagnostic(ptrs, ctx.weights, ctx.model.drift().constants(), eps);
    std::vector<std::string> header{"eps", "sup_mass"};
    for (std::size_t v : tv) header.push_back("mass_n" + std::to_string(v));
    CsvBuilder tcsv(header, ctx.comment);
    bool within = true;
    for (const auto& r : rows) {
        std::vector<double> row{r.eps, r.sup_mass};
        row.insert(row.end(), r.masses.begin(), r.masses.end());
        tcsv.row(row);
        within = within && r.sup_mass <= r.eps;
    }
    ctx.emit("tightness.csv", tcsv.str());
    ctx.headline["tightness_within_eps"] = within;
}

void run_lyapunov(Context& ctx, const json& p) {
    const std::string shape = p.at("shape").get<std::string>();
    const double theta = num(p, "theta", ctx.model.drift().constants().theta);
    LyapunovSpec spec;
    if (shape == "unit") spec = LyapunovSpec::unit(theta);
    else if (shape == "weighted") {
        if (!ctx.weights.v) throw ConfigProblem("/weights/v", "is required for the weighted Lyapunov shape");
        spec = LyapunovSpec::weighted(*ctx.weights.v, ctx.model.volume(), theta);
    } else {
        auto w = vec(p, "weights");
        if (w.size() != ctx.model.volume())
            throw ConfigProblem("/experiment/lyapunov/weights", "needs one weight per site for the custom shape");
        spec = LyapunovSpec::custom(std::move(w), theta, num(p, "offset", 1.0));
    }
    DriftConstantsPair k;
    if (p.contains("c") && p.contains("C")) k = {p.at("c").get<double>(), p.at("C").get<double>()};
    else {
        const auto autoc = auto_constants(ctx.model, spec);
        if (!autoc.constants) throw ConfigProblem("/experiment/lyapunov", "c and C are required: " + autoc.reason);
        k = *autoc.constants;
        if (p.contains("c")) k.c = p.at("c").get<double>();
        if (p.contains("C")) k.C = p.at("C").get<double>();
    }
    LyapunovSampling s;
    s.count = count(p, "samples", s.count);
    s.radius = num(p, "radius", s.radius);
    s.heavy_fraction = num(p, "heavy_fraction", s.heavy_fraction);
    s.cauchy_scale = num(p, "cauchy_scale", s.cauchy_scale);
    s.t = num(p, "t", s.t);
    s.seed = ctx.seed;

    std::vector<std::string> header{"c", "C", "pass", "max_violation", "samples"};
    for (std::size_t i = 1; i <= ctx.model.volume(); ++i) header.push_back("witness_x" + std::to_string(i));
    CsvBuilder csv(header, ctx.comment);
    auto record = [&](const DriftCheckReport& r) {
        std::vector<CsvField> row{r.c, r.C, std::int64_t{r.pass ? 1 : 0}, r.max_violation, static_cast<std::int64_t>(r.samples)};
        for (double v : r.witness) row.emplace_back(v);
        csv.row(row);
    };
    const auto report = drift_condition_check(ctx.model, spec, k.c, k.C, s);
    record(report);
    ctx.headline["V"] = spec.label();
    ctx.headline["c"] = k.c;
    ctx.headline["C"] = k.C;
    ctx.headline["pass"] = report.pass;
    ctx.headline["max_violation"] = report.max_violation;
    if (p.contains("perturb")) {
        const double factor = p.at("perturb").get<double>();
        const auto perturbed = drift_condition_check(ctx.model, spec, factor * k.c, k.C, s);
        record(perturbed);
        ctx.headline["perturbed_pass"] = perturbed.pass;
        ctx.headline["perturbed_max_violation"] = perturbed.max_violation;
    }
    ctx.emit("lyapunov.csv", csv.str());
}

void run_hormander(Context& ctx, const json& p) {
    SpinChainModel model = ctx.model;
    if (p.contains("zero_sub")) {
        const auto site = static_cast<int>(p.at("zero_sub").get<double>());
        if (static_cast<std::size_t>(site) > model.volume())
            throw ConfigProblem("/experiment/hormander/zero_sub", "exceeds the volume");
        model = model.with_coupling(model.coupling().with_zeroed_sub(site));
    }
    const std::size_t n = model.volume();
    const std::size_t states = count(p, "states", 100);
    const double scale = num(p, "scale", 1.0);
    const bool numeric = p.value("numeric", false);
    NumericBracketOptions nopts;
    nopts.fd_step = num(p, "fd_step", nopts.fd_step);

    std::vector<BracketBasis> bases;
    std::vector<double> gaps;
    bool all_full = true;
    double min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < states; ++s) {
        std::vector<double> x(n);
        CounterRng(ctx.seed, s).fill_normal(0, x, scale);
        bases.push_back(bracket_basis_analytic(model, x));
        const auto rank = rank_check(bases.back());
        all_full = all_full && rank.full;
        min_ratio = std::min(min_ratio, rank.min_ratio);
        if (numeric) gaps.push_back(basis_disagreement(bases.back(), bracket_basis_numeric(model, x, nopts)));
    }
    ctx.emit("rank.csv", rank_table_csv(bases, ctx.comment));
    ctx.headline["states"] = states;
    ctx.headline["all_full"] = all_full;
    ctx.headline["min_ratio"] = min_ratio;
    if (numeric) {
        CsvBuilder csv({"sample", "disagreement"}, ctx.comment);
        for (std::size_t s = 0; s < gaps.size(); ++s) csv.row({static_cast<std::int64_t>(s), gaps[s]});
        ctx.emit("numeric_agreement.csv", csv.str());
        ctx.headline["max_disagreement"] = *std::max_element(gaps.begin(), gaps.end());
    }
}

void run_control(Context& ctx, const json& p) {
    const std::size_t n = ctx.model.volume();
    const auto x = state_exact(p, "x", n, "/experiment/control");
    const auto z = state_exact(p, "z", n, "/experiment/control");
    const double T = p.at("T").get<double>();
    const auto plan = plan_steering(ctx.model, x, z, T, count(p, "samples", kDefaultControlSamples));
    const double rk = num(p, "rk_step", 1e-4);
    const double error = verify_steering(ctx.model, x, z, T, plan, rk);
    const auto& y = plan.states();
    const std::size_t last = plan.grid().size() - 1;
    double endpoint = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        endpoint = std::max(endpoint, std::abs(y[i] - x[i]));
        endpoint = std::max(endpoint, std::abs(y[last * n + i] - z[i]));
    }
    ctx.emit("control.csv", plan.to_csv(ctx.comment));
    ctx.headline["error"] = error;
    ctx.headline["endpoint_error"] = endpoint;
    ctx.headline["rk_step"] = rk;
    ctx.headline["condition"] = plan.interpolant().condition();
    double umax = 0.0;
    for (double u : plan.control()) umax = std::max(umax, std::abs(u));
    ctx.headline["max_abs_control"] = umax;
}

void run_periodic(Context& ctx, const json& p) {
    if (!ctx.model.is_periodic()) throw ConfigProblem("/model", "the periodic experiment needs a periodic drift or coupling");
    PeriodicOptions po;
    po.h = num(p, "h", po.h);
    po.scheme = scheme_of(p);
    po.burn_cycles = count(p, "burn_cycles", po.burn_cycles);
    po.cycles = count(p, "cycles", po.cycles);
    po.seed = ctx.seed;
    auto phases = vec(p, "phases");
    if (phases.empty()) phases.push_back(0.0);

    std::vector<EmpiricalMeasure> measures;
    for (double s : phases) measures.push_back(estimate_periodic_measure(ctx.model, s, po));
    std::vector<const EmpiricalMeasure*> ptrs;
    for (const auto& m : measures) ptrs.push_back(&m);
    const auto bins = shared_binning(ptrs);

    CsvBuilder manifest({"index", "phase", "file", "samples"}, ctx.comment);
    json tv = json::array();
    const auto first = measures.front().rebinned(bins);
    for (std::size_t q = 0; q < measures.size(); ++q) {
        char name[32];
        std::snprintf(name, sizeof name, "phase_%03zu.csv", q);
        const auto binned = measures[q].rebinned(bins);
        ctx.emit(name, histogram_csv(binned, ctx.comment + " phase=" + fmt17(phases[q])));
        manifest.row({static_cast<std::int64_t>(q), phases[q], std::string(name), static_cast<std::int64_t>(binned.sample_count())});
        tv.push_back({{"phase", phases[q]},
                      {"tv_to_first", tv_distance(binned, first)},
                      {"floor", noise_floor(binned.sample_count(), first.sample_count())}});
    }
    ctx.emit("phases.csv", manifest.str());
    ctx.headline["phases"] = tv;

    if (p.contains("Q")) {
        const auto lift = average_lift(ctx.model, count(p, "Q", 1), po);
        const auto counts = lift.phase_histogram();
        CsvBuilder csv({"phase", "count"}, ctx.comment);
        double chi2 = 0.0;
        const double expect = static_cast<double>(lift.state.sample_count()) / static_cast<double>(counts.size());
        for (std::size_t q = 0; q < counts.size(); ++q) {
            csv.row({lift.phases[q], static_cast<std::int64_t>(counts[q])});
            const double d = static_cast<double>(counts[q]) - expect;
            chi2 += d * d / expect;
        }
        ctx.emit("lift_phases.csv", csv.str());
        ctx.emit("lift_state.csv", histogram_csv(lift.state, ctx.comment));
        ctx.headline["lift_phase_chi2"] = chi2;
    }

    if (p.contains("transport")) {
        const auto& tp = p.at("transport");
        const double s = tp.at("s").get<double>(), t = tp.at("t").get<double>();
        const auto mu_s = estimate_periodic_measure(ctx.model, s, po);
        const auto mu_t = estimate_periodic_measure(ctx.model, t, po);
        const EmpiricalMeasure* pair[] = {&mu_s, &mu_t};
        const auto tb = shared_binning(pair);
        EnsembleOptions eo = ensemble_of(tp);
        eo.h = po.h;
        eo.scheme = po.scheme;
        const auto res = transport_check(ctx.model, s, t, mu_s.rebinned(tb), mu_t.rebinned(tb), count(tp, "replicas", 1),
                                         derive_seed(ctx.seed, 7), eo);
        CsvBuilder csv({"s", "t", "gap", "floor", "null_bias", "replicas"}, ctx.comment);
        csv.row({s, t, res.gap, res.floor, res.null_bias, static_cast<std::int64_t>(res.replicas)});
        ctx.emit("transport.csv", csv.str());
        ctx.headline["transport"] = {{"gap", res.gap}, {"floor", res.floor}, {"null_bias", res.null_bias}};
    }
}

bool needs_validity(const std::string& kind) {
    return kind == "invariant" || kind == "decay" || kind == "converge" || kind == "tails" || kind == "periodic";
}

int resolve_threads(const json& config, const RunOptions& options) {
    if (options.threads) return *options.threads;
    if (config.contains("threads")) return static_cast<int>(config.at("threads").get<double>());
    if (const char* env = std::getenv("LATTICESPIN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw UsageError("LATTICESPIN_THREADS must be a positive integer");
    }
    return available_threads();
}

json versions() {
    return {{"latticespin", library_version()},
            {"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"openmp", _OPENMP},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                  "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

json issues_json(const std::vector<ConfigIssue>& issues) {
    json out = json::array();
    for (const auto& i : issues) out.push_back({{"path", i.path}, {"message", i.message}});
    return out;
}

} // namespace

std::string library_version() { return LATTICESPIN_VERSION; }

RunResult run_config(const nlohmann::json& config, const RunOptions& options, std::string_view source) {
    const auto started = std::chrono::steady_clock::now();
    RunResult result;
    std::string out = "out";
    if (config.is_object() && config.contains("output") && config.at("output").is_string())
        out = config.at("output").get<std::string>();
    result.out_dir = options.out ? *options.out : std::filesystem::path(out);

    json summary;
    summary["source"] = std::string(source);
    summary["config_hash"] = hex64(fnv1a64(config.dump()));
    summary["versions"] = versions();
    std::string kind;
    std::vector<ConfigIssue> errors;
    std::vector<std::string> files;
    json headline = json::object();
    int code = kExitOk;

    try {
        std::filesystem::create_directories(result.out_dir);
        errors = check_config(config);
        if (!errors.empty()) throw ConfigProblem("", "schema");
        kind = config.at("experiment").begin().key();
        const auto& params = config.at("experiment").begin().value();
        const int threads = resolve_threads(config, options);
        set_thread_count(threads);
        summary["threads"] = threads;
        const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
        summary["seed"] = seed;
        summary["experiment"] = kind;

        const auto model = build_model(config);
        const auto weights = build_weights(config);
        Context ctx{config, model, weights, seed, result.out_dir,
                    "latticespin " + library_version() + " experiment=" + kind + " config=" + hex64(fnv1a64(config.dump())) +
                        " seed=" + std::to_string(seed) + " model=" + hex64(model.hash()),
                    {}, json::object(), kExitOk, {}};
        summary["model"] = model.description();
        summary["model_hash"] = hex64(model.hash());

        if (needs_validity(kind) && config.value("require_valid", true)) {
            const auto report = validate_assumptions(model, weights);
            if (!report.pass()) {
                ctx.emit("validation.csv", validation_csv(report, ctx.comment));
                ctx.headline["failed"] = failing_ids(report);
                ctx.exit_code = kExitValidation;
                for (const auto& c : report.conditions)
                    if (!c.pass) ctx.errors.push_back({"/model", c.id + " fails at witness (" + join(c.witness) + ")"});
            }
        }
        if (ctx.exit_code == kExitOk) {
            if (kind == "validate") run_validate(ctx, params);
            else if (kind == "simulate") run_simulate(ctx, params);
            else if (kind == "invariant") run_invariant(ctx, params);
            else if (kind == "decay") run_decay(ctx, params);
            else if (kind == "converge") run_converge(ctx, params);
            else if (kind == "tails") run_tails(ctx, params);
            else if (kind == "lyapunov") run_lyapunov(ctx, params);
            else if (kind == "hormander") run_hormander(ctx, params);
            else if (kind == "control") run_control(ctx, params);
            else run_periodic(ctx, params);
        }
        files = std::move(ctx.files);
        headline = std::move(ctx.headline);
        errors = std::move(ctx.errors);
        code = ctx.exit_code;
    } catch (const ConfigProblem& e) {
        if (errors.empty()) errors.push_back({e.path, e.what()});
        code = kExitUsage;
    } catch (const UsageError& e) {
        errors.push_back({"", e.what()});
        code = kExitUsage;
    } catch (const ModelError& e) {
        errors.push_back({"/model", e.what()});
        code = kExitValidation;
    } catch (const StructuralError& e) {
        errors.push_back({"/model", e.what()});
        code = kExitValidation;
    } catch (const EstimationError& e) {
        errors.push_back({"", e.what()});
        code = kExitBlowup;
    } catch (const NumericalError& e) {
        errors.push_back({"", e.what()});
        code = kExitBlowup;
    } catch (const std::exception& e) {
        errors.push_back({"", e.what()});
        code = kExitFailure;
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    summary["status"] = code == kExitOk ? "ok" : "error";
    summary["exit_code"] = code;
    summary["errors"] = issues_json(errors);
    summary["headline"] = headline;
    summary["files"] = files;
    summary["wall_time_s"] = wall;
    result.exit_code = code;
    result.summary = summary;
    try {
        std::filesystem::create_directories(result.out_dir);
        write_atomic(result.out_dir / "summary.json", summary.dump(2) + "\n");
    } catch (const std::exception&) {
        if (result.exit_code == kExitOk) result.exit_code = kExitFailure;
    }
    return result;
}

RunResult run_config_file(const std::filesystem::path& path, const RunOptions& options) {
    std::ifstream in(path);
    json config;
    std::string problem;
    if (!in) problem = "cannot open " + path.string();
    else {
        try {
            config = json::parse(in);
        } catch (const json::parse_error& e) {
            problem = e.what();
        }
    }
    if (problem.empty()) return run_config(config, options, path.string());

    RunResult result;
    result.exit_code = kExitUsage;
    result.out_dir = options.out ? *options.out : std::filesystem::path("out");
    result.summary = {{"source", path.string()},
                      {"status", "error"},
                      {"exit_code", kExitUsage},
                      {"errors", json::array({{{"path", ""}, {"message", problem}}})},
                      {"headline", json::object()},
                      {"files", json::array()},
                      {"versions", versions()}};
    try {
        std::filesystem::create_directories(result.out_dir);
        write_atomic(result.out_dir / "summary.json", result.summary.dump(2) + "\n");
    } catch (const std::exception&) {
    }
    return result;
}

} // namespace latticespin
