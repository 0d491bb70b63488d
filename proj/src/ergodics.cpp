#include "latticespin/ergodics.hpp"

#include "latticespin/errors.hpp"
#include "latticespin/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <json.hpp>

namespace latticespin {

namespace {

double half_width(double mean, double var) {
    const double l = std::abs(mean) + 6.0 * std::sqrt(std::max(var, 0.0));
    return (l > 0.0 && std::isfinite(l)) ? l : 1.0;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(std::span<const double> v) {
    MeanSe out;
    if (v.empty()) return out;
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    out.mean = s / n;
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return out;
}

/// Removes blown-up replicas; throws when more than 1% blew up.
std::vector<double> drop_blowups(std::span<const double> values, std::span<const unsigned char> blown, const char* what) {
    std::size_t bad = 0;
    std::vector<double> kept;
    kept.reserve(values.size());
    for (std::size_t r = 0; r < values.size(); ++r) {
        if (blown[r]) ++bad;
        else kept.push_back(values[r]);
    }
    if (static_cast<double>(bad) > 0.01 * static_cast<double>(values.size()))
        throw EstimationError(std::string(what) + ": " + std::to_string(bad) + " of " + std::to_string(values.size()) +
                              " replicas blew up; use the tamed scheme or a smaller step");
    return kept;
}

void require_homogeneous(const SpinChainModel& model, const char* what) {
    if (model.is_periodic())
        throw UsageError(std::string(what) + " requires a time-homogeneous model; use the periodic estimators");
}

double weighted_pow_sum(std::span<const double> x, double q, const SiteWeight& rho) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::pow(std::abs(x[i]), q) * rho(i + 1);
    return s;
}

} // namespace

// ---------------------------------------------------------------------------

std::size_t Binning::index(double v) const {
    const double q = (v - lo) / width();
    if (!(q > 0.0)) return 0;
    const auto j = static_cast<std::size_t>(q);
    return std::min(j, bins - 1);
}

std::string Provenance::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = kind;
    j["model_hash"] = hex64(model_hash);
    j["seed"] = seed;
    j["burn_in"] = burn_in;
    j["thinning"] = thinning;
    j["h"] = h;
    if (phase) j["phase"] = *phase;
    return j.dump();
}

EmpiricalMeasure::EmpiricalMeasure(std::size_t volume, std::vector<double> samples, double theta,
                                   Provenance provenance, std::vector<Binning> binning)
    : volume_(volume), count_(0), samples_(std::move(samples)), theta_(theta), provenance_(std::move(provenance)) {
    if (volume_ == 0) throw UsageError("EmpiricalMeasure: volume must be positive");
    if (samples_.empty() || samples_.size() % volume_ != 0)
        throw UsageError("EmpiricalMeasure: sample buffer is empty or not a multiple of the volume");
    if (!(theta_ >= 1.0)) throw UsageError("EmpiricalMeasure: theta must be >= 1");
    for (double v : samples_)
        if (!std::isfinite(v)) throw UsageError("EmpiricalMeasure: non-finite sample");
    count_ = samples_.size() / volume_;

    sums_.assign(volume_, {});
    for (std::size_t k = 0; k < count_; ++k)
        for (std::size_t i = 0; i < volume_; ++i) {
            const double v = samples_[k * volume_ + i];
            const double v2 = v * v;
            auto& s = sums_[i];
            s.s1 += v;
            s.s2 += v2;
            s.s4 += v2 * v2;
            s.s2theta += theta_ == 1.0 ? v2 : std::pow(std::abs(v), 2.0 * theta_);
        }

    if (binning.empty()) {
        for (std::size_t i = 1; i <= volume_; ++i) {
            const double l = half_width(mean(i), variance(i));
            binning.push_back({-l, l, kDefaultBins});
        }
    }
    if (binning.size() != volume_) throw UsageError("EmpiricalMeasure: one binning per site required");
    for (std::size_t i = 0; i < volume_; ++i) {
        const auto& b = binning[i];
        if (b.bins == 0 || !(b.hi > b.lo)) throw UsageError("EmpiricalMeasure: bin edges must be increasing");
        SiteHistogram hist{i + 1, b, std::vector<std::uint64_t>(b.bins, 0)};
        for (std::size_t k = 0; k < count_; ++k) ++hist.counts[b.index(samples_[k * volume_ + i])];
        histograms_.push_back(std::move(hist));
    }
}

std::vector<Binning> EmpiricalMeasure::binning() const {
    std::vector<Binning> out;
    for (const auto& h : histograms_) out.push_back(h.binning);
    return out;
}

EmpiricalMeasure EmpiricalMeasure::rebinned(std::vector<Binning> binning) const {
    return {volume_, samples_, theta_, provenance_, std::move(binning)};
}

double EmpiricalMeasure::moment(std::size_t site, double order) const {
    if (site < 1 || site > volume_) throw UsageError("moment: site out of range");
    const auto& s = sums_[site - 1];
    const double n = static_cast<double>(count_);
    if (order == 1.0) return s.s1 / n;
    if (order == 2.0) return s.s2 / n;
    if (order == 4.0) return s.s4 / n;
    if (order == 2.0 * theta_) return s.s2theta / n;
    double acc = 0.0;
    for (std::size_t k = 0; k < count_; ++k) acc += std::pow(std::abs(samples_[k * volume_ + site - 1]), order);
    return acc / n;
}

double EmpiricalMeasure::variance(std::size_t site) const {
    const double m = mean(site);
    const double n = static_cast<double>(count_);
    const double v = moment(site, 2.0) - m * m;
    return count_ > 1 ? std::max(v, 0.0) * n / (n - 1.0) : 0.0;
}

double EmpiricalMeasure::moment_se(std::size_t site, int order, std::size_t batches) const {
    if (site < 1 || site > volume_) throw UsageError("moment_se: site out of range");
    const std::size_t b = std::min(batches, count_);
    if (b < 2) return std::numeric_limits<double>::infinity();
    const std::size_t per = count_ / b;
    std::vector<double> means(b, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
        double s = 0.0;
        for (std::size_t k = j * per; k < (j + 1) * per; ++k) s += std::pow(samples_[k * volume_ + site - 1], order);
        means[j] = s / static_cast<double>(per);
    }
    return mean_se(means).se;
}

double EmpiricalMeasure::variance_se(std::size_t site, std::size_t batches) const {
    if (site < 1 || site > volume_) throw UsageError("variance_se: site out of range");
    const std::size_t b = std::min(batches, count_);
    if (b < 2) return std::numeric_limits<double>::infinity();
    const double m = mean(site);
    const std::size_t per = count_ / b;
    std::vector<double> means(b, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
        double s = 0.0;
        for (std::size_t k = j * per; k < (j + 1) * per; ++k) {
            const double d = samples_[k * volume_ + site - 1] - m;
            s += d * d;
        }
        means[j] = s / static_cast<double>(per);
    }
    return mean_se(means).se;
}

std::vector<Binning> shared_binning(std::span<const EmpiricalMeasure* const> measures, std::size_t bins) {
    if (measures.empty()) throw UsageError("shared_binning: no measures");
    const std::size_t n = measures.front()->volume();
    for (const auto* m : measures)
        if (m->volume() != n) throw UsageError("shared_binning: measures have different volumes");
    std::vector<Binning> out;
    for (std::size_t i = 1; i <= n; ++i) {
        double l = 0.0;
        for (const auto* m : measures) l = std::max(l, half_width(m->mean(i), m->variance(i)));
        out.push_back({-l, l, bins});
    }
    return out;
}

double tv_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::span<const std::size_t> sites) {
    std::vector<std::size_t> all;
    if (sites.empty()) {
        if (mu.volume() != nu.volume()) throw UsageError("tv_distance: volumes differ");
        for (std::size_t i = 1; i <= mu.volume(); ++i) all.push_back(i);
        sites = all;
    }
    double total = 0.0;
    for (std::size_t site : sites) {
        if (site < 1 || site > mu.volume() || site > nu.volume()) throw UsageError("tv_distance: site out of range");
        const auto& a = mu.histogram(site);
        const auto& b = nu.histogram(site);
        if (!(a.binning == b.binning)) throw UsageError("tv_distance: mismatched binning at site " + std::to_string(site));
        const double na = static_cast<double>(mu.sample_count());
        const double nb = static_cast<double>(nu.sample_count());
        double s = 0.0;
        for (std::size_t j = 0; j < a.counts.size(); ++j)
            s += std::abs(static_cast<double>(a.counts[j]) / na - static_cast<double>(b.counts[j]) / nb);
        total += 0.5 * s;
    }
    return std::clamp(total / static_cast<double>(sites.size()), 0.0, 1.0);
}

double tv_distance_shared(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, std::size_t bins) {
    const EmpiricalMeasure* pair[] = {&mu, &nu};
    const auto b = shared_binning(pair, bins);
    return tv_distance(mu.rebinned(b), nu.rebinned(b));
}

double noise_floor(std::size_t n1, std::size_t n2) {
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    return 2.0 / std::sqrt(2.0 * a * b / (a + b));
}

double null_tv_bias(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    if (mu.volume() != nu.volume()) throw UsageError("null_tv_bias: volumes differ");
    const double na = static_cast<double>(mu.sample_count()), nb = static_cast<double>(nu.sample_count());
    const double scale = (1.0 / na + 1.0 / nb) / (2.0 * std::numbers::pi);
    double total = 0.0;
    for (std::size_t i = 1; i <= mu.volume(); ++i) {
        const auto& a = mu.histogram(i);
        const auto& b = nu.histogram(i);
        if (!(a.binning == b.binning)) throw UsageError("null_tv_bias: mismatched binning");
        double s = 0.0;
        for (std::size_t j = 0; j < a.counts.size(); ++j) {
            const double p = (static_cast<double>(a.counts[j]) + static_cast<double>(b.counts[j])) / (na + nb);
            s += std::sqrt(p * scale);
        }
        total += s;
    }
    return total / static_cast<double>(mu.volume());
}

EmpiricalMeasure measure_from_snapshots(const EnsembleSnapshots& snap, std::size_t ti, double theta, Provenance provenance) {
    auto rows = snap.finite_rows(ti);
    if (rows.empty()) throw EstimationError("every replica blew up");
    return {snap.volume, std::move(rows), theta, std::move(provenance)};
}

// ---------------------------------------------------------------------------

EmpiricalMeasure estimate_invariant(const SpinChainModel& model, const InvariantOptions& o) {
    require_homogeneous(model, "estimate_invariant");
    if (!std::isfinite(o.burn_in) || o.burn_in < 0.0) throw UsageError("estimate_invariant: burn_in must be finite and >= 0");
    if (!(o.thinning > 0.0)) throw UsageError("estimate_invariant: thinning must be positive");
    if (o.n_samples == 0) throw UsageError("estimate_invariant: n_samples must be positive");
    if (!(o.h > 0.0)) throw UsageError("estimate_invariant: step must be positive");
    const std::size_t n = model.volume();
    std::vector<double> x = o.x0.empty() ? std::vector<double>(n, 0.0) : o.x0;
    if (x.size() != n) throw UsageError("estimate_invariant: initial state does not match the volume");
    const std::size_t burn = grid_index(o.burn_in, o.h);
    const std::size_t thin = grid_index(o.thinning, o.h);
    if (thin == 0) throw UsageError("estimate_invariant: thinning is below the step size");

    const CoefficientSchedule schedule(model, o.h, 0.0);
    const StreamNoise noise{CounterRng(o.seed, 0), std::sqrt(o.h)};
    std::vector<double> samples;
    samples.reserve(o.n_samples * n);
    std::vector<double> work(n);
    const bool ok = integrate(model.drift(), schedule, o.scheme, noise, 0, burn + o.n_samples * thin, x, work,
                              [&](std::size_t k, std::span<const double> s) {
                                  if (k > burn && (k - burn) % thin == 0) samples.insert(samples.end(), s.begin(), s.end());
                                  return true;
                              });
    if (!ok) throw EstimationError("estimate_invariant: the path blew up; use the tamed scheme or a smaller step");
    Provenance prov{"invariant", model.hash(), o.seed, o.burn_in, o.thinning, o.h, std::nullopt};
    return {n, std::move(samples), model.drift().constants().theta, prov};
}

DecayFit fit_decay(std::span<const double> times, std::span<const double> tv, double floor) {
    const std::vector<double> floors(times.size(), floor);
    auto fit = fit_decay(times, tv, floors);
    fit.floor = floor;
    return fit;
}

DecayFit fit_decay(std::span<const double> times, std::span<const double> tv, std::span<const double> floors) {
    if (times.size() != tv.size() || floors.size() != tv.size())
        throw UsageError("fit_decay: times, estimates and floors differ in length");
    DecayFit fit;
    fit.times.assign(times.begin(), times.end());
    fit.tv.assign(tv.begin(), tv.end());
    fit.floors.assign(floors.begin(), floors.end());
    fit.floor = floors.empty() ? 0.0 : *std::min_element(floors.begin(), floors.end());
    std::vector<double> ts, ys;
    for (std::size_t j = 0; j < times.size(); ++j)
        if (tv[j] > floors[j]) {
            ts.push_back(times[j]);
            ys.push_back(std::log(tv[j]));
        }
    fit.points_used = ts.size();
    fit.already_mixed = ts.empty();
    if (ts.size() < 2) return fit;
    const double n = static_cast<double>(ts.size());
    double mt = 0.0, my = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        mt += ts[j];
        my += ys[j];
    }
    mt /= n;
    my /= n;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t j = 0; j < ts.size(); ++j) {
        stt += (ts[j] - mt) * (ts[j] - mt);
        sty += (ts[j] - mt) * (ys[j] - my);
        syy += (ys[j] - my) * (ys[j] - my);
    }
    if (stt == 0.0) return fit;
    const double slope = sty / stt;
    fit.intercept = my - slope * mt;
    fit.r2 = syy > 0.0 ? (sty * sty) / (stt * syy) : 1.0;
    if (ts.size() > 2) fit.alpha_se = std::sqrt(std::max(0.0, syy - slope * sty) / (n - 2.0) / stt);
    if (ts.size() >= 4) fit.alpha = -slope;
    return fit;
}

DecayFit ergodic_decay(const SpinChainModel& model, std::span<const double> x, std::span<const double> y,
                       std::span<const double> check_times, std::size_t replicas, std::uint64_t seed,
                       const DecayOptions& options) {
    require_homogeneous(model, "ergodic_decay");
    if (check_times.empty()) throw UsageError("ergodic_decay: no check times");
    const double theta = model.drift().constants().theta;
    const auto sx = run_snapshots(model, x, check_times, replicas, derive_seed(seed, 1), options.ensemble);
    const auto sy = run_snapshots(model, y, check_times, replicas, derive_seed(seed, 2), options.ensemble);
    drop_blowups(std::vector<double>(replicas, 0.0), sx.blowup, "ergodic_decay");
    drop_blowups(std::vector<double>(replicas, 0.0), sy.blowup, "ergodic_decay");
    const double nominal = 2.0 / std::sqrt(static_cast<double>(replicas));
    std::vector<double> tv, floors;
    for (std::size_t j = 0; j < check_times.size(); ++j) {
        Provenance p{"decay", model.hash(), seed, 0.0, 0.0, options.ensemble.h, std::nullopt};
        const auto a = measure_from_snapshots(sx, j, theta, p);
        const auto b = measure_from_snapshots(sy, j, theta, p);
        const EmpiricalMeasure* pair[] = {&a, &b};
        const auto bins = shared_binning(pair, options.bins);
        const auto ra = a.rebinned(bins), rb = b.rebinned(bins);
        tv.push_back(tv_distance(ra, rb));
        floors.push_back(std::max(nominal, 2.0 * null_tv_bias(ra, rb)));
    }
    auto fit = fit_decay(check_times, tv, floors);
    fit.floor = nominal;
    return fit;
}

// ---------------------------------------------------------------------------

MomentSupEstimate moment_sup_check(const SpinChainModel& model, std::span<const double> x, double T1, double p,
                                   std::size_t replicas, std::uint64_t seed, const SiteWeight& rho,
                                   const EnsembleOptions& options) {
    const std::size_t n = model.volume();
    if (x.size() != n) throw UsageError("moment_sup_check: initial state does not match the volume");
    if (!(p > 0.0)) throw UsageError("moment_sup_check: p must be positive");
    if (replicas == 0) throw UsageError("moment_sup_check: replicas must be positive");
    const double q = 2.0 * model.drift().constants().theta;
    const std::size_t steps = grid_index(T1, options.h);
    const CoefficientSchedule schedule(model, options.h, options.start_time);
    const double sqrt_h = std::sqrt(options.h) * options.noise_scale;
    auto norm_p = [&](std::span<const double> s) { return std::pow(weighted_pow_sum(s, q, rho), p / q); };
    const double init = norm_p(x);

    std::vector<double> sup(replicas, 0.0);
    std::vector<unsigned char> blown(replicas, 0);
    for_each_replica(replicas, options.backend, [&](std::size_t r) {
        std::vector<double> s(x.begin(), x.end()), work(n);
        double best = init;
        const StreamNoise noise{CounterRng(seed, options.first_stream + r), sqrt_h};
        const bool ok = integrate(model.drift(), schedule, options.scheme, noise, 0, steps, s, work,
                                  [&](std::size_t, std::span<const double> st) {
                                      best = std::max(best, norm_p(st));
                                      return true;
                                  });
        sup[r] = best;
        blown[r] = !ok;
    });
    MomentSupEstimate out;
    const auto kept = drop_blowups(sup, blown, "moment_sup_check");
    out.blowups = replicas - kept.size();
    const auto ms = mean_se(kept);
    out.initial_norm_p = init;
    out.estimate = ms.mean;
    out.se = ms.se;
    out.ratio = ms.mean / (1.0 + init);
    return out;
}

std::vector<MomentSupEstimate> moment_sup_ladder(const SpinChainModel& model, std::span<const double> x,
                                                 std::span<const double> scales, double T1, double p,
                                                 std::size_t replicas, std::uint64_t seed, const SiteWeight& rho,
                                                 const EnsembleOptions& options) {
    std::vector<MomentSupEstimate> out;
    for (double c : scales) {
        std::vector<double> xs(x.begin(), x.end());
        for (auto& v : xs) v *= c;
        out.push_back(moment_sup_check(model, xs, T1, p, replicas, seed, rho, options));
    }
    return out;
}

std::pair<double, double> TailTable::sup_over_volumes(std::size_t n0) const {
    std::pair<double, double> best{-1.0, 0.0};
    for (const auto& r : rows)
        if (r.n0 == n0 && r.estimate > best.first) best = {r.estimate, r.se};
    if (best.first < 0.0) throw UsageError("sup_over_volumes: no row for this n0");
    return best;
}

TailTable tail_bound_check(const SpinChainModel& model, std::span<const std::size_t> volumes, const PaddedSequence& x,
                           double t, std::span<const std::size_t> n0_ladder, const SiteWeight& rho,
                           std::size_t replicas, std::uint64_t seed, const EnsembleOptions& options) {
    if (volumes.empty() || n0_ladder.empty()) throw UsageError("tail_bound_check: empty volume or n0 list");
    TailTable table;
    for (std::size_t n : volumes) {
        if (n == 0) throw UsageError("tail_bound_check: volumes must be positive");
        const auto m = model.with_volume(n);
        const auto x0 = project(x, n);
        const double times[] = {t};
        const auto snap = run_snapshots(m, x0, times, replicas, seed, options);
        for (std::size_t n0 : n0_ladder) {
            if (n0 == 0) throw UsageError("tail_bound_check: n0 must be positive");
            std::vector<double> vals(replicas, 0.0);
            for (std::size_t r = 0; r < replicas; ++r) vals[r] = tail_mass(snap.at(0, r), n0, rho);
            const auto kept = drop_blowups(vals, snap.blowup, "tail_bound_check");
            const auto ms = mean_se(kept);
            table.rows.push_back({n, n0, ms.mean, ms.se});
        }
    }
    return table;
}

double VolumeConvergence::headline(std::size_t v) const {
    double best = 0.0;
    for (std::size_t a = 0; a < volumes.size(); ++a)
        for (std::size_t b = 0; b < volumes.size(); ++b)
            if (std::min(volumes[a], volumes[b]) >= v) best = std::max(best, at(a, b));
    return best;
}

VolumeConvergence volume_convergence(const SpinChainModel& model, std::size_t k, std::span<const std::size_t> volumes,
                                     const PaddedSequence& x, double T1, std::size_t replicas, std::uint64_t seed,
                                     const EnsembleOptions& options) {
    if (volumes.empty()) throw UsageError("volume_convergence: no volumes");
    if (k == 0) throw UsageError("volume_convergence: k must be positive");
    const std::size_t vmin = *std::min_element(volumes.begin(), volumes.end());
    if (k >= vmin)
        throw UsageError("volume_convergence: k = " + std::to_string(k) + " must be below the smallest volume " +
                         std::to_string(vmin));
    if (replicas == 0) throw UsageError("volume_convergence: replicas must be positive");
    const std::size_t nv = volumes.size();
    const std::size_t steps = grid_index(T1, options.h);
    const double sqrt_h = std::sqrt(options.h) * options.noise_scale;

    std::vector<SpinChainModel> models;
    std::vector<CoefficientSchedule> schedules;
    models.reserve(nv);
    for (std::size_t n : volumes) models.push_back(model.with_volume(n));
    schedules.reserve(nv);
    for (const auto& m : models) schedules.emplace_back(m, options.h, options.start_time);

    // per replica and pair (a < b): sup_t |X^(a)_(k) - X^(b)_(k)|^2
    const std::size_t npairs = nv * (nv - 1) / 2;
    std::vector<double> sups(replicas * npairs, 0.0);
    std::vector<unsigned char> blown(replicas, 0);
    for_each_replica(replicas, options.backend, [&](std::size_t r) {
        std::vector<std::vector<double>> heads(nv, std::vector<double>((steps + 1) * k));
        const StreamNoise noise{CounterRng(seed, options.first_stream + r), sqrt_h};
        for (std::size_t a = 0; a < nv; ++a) {
            auto s = project(x, volumes[a]);
            std::vector<double> work(s.size());
            std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), heads[a].begin());
            const bool ok = integrate(models[a].drift(), schedules[a], options.scheme, noise, 0, steps, s, work,
                                      [&](std::size_t step, std::span<const double> st) {
                                          std::copy(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(k),
                                                    heads[a].begin() + static_cast<std::ptrdiff_t>(step * k));
                                          return true;
                                      });
            if (!ok) {
                blown[r] = 1;
                return;
            }
        }
        std::size_t pi = 0;
        for (std::size_t a = 0; a < nv; ++a)
            for (std::size_t b = a + 1; b < nv; ++b, ++pi) {
                double best = 0.0;
                for (std::size_t step = 0; step <= steps; ++step) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < k; ++i) {
                        const double e = heads[a][step * k + i] - heads[b][step * k + i];
                        d += e * e;
                    }
                    best = std::max(best, d);
                }
                sups[r * npairs + pi] = best;
            }
    });

    VolumeConvergence out;
    out.volumes.assign(volumes.begin(), volumes.end());
    out.k = k;
    out.d.assign(nv * nv, 0.0);
    out.se.assign(nv * nv, 0.0);
    std::size_t pi = 0;
    for (std::size_t a = 0; a < nv; ++a)
        for (std::size_t b = a + 1; b < nv; ++b, ++pi) {
            std::vector<double> vals(replicas);
            for (std::size_t r = 0; r < replicas; ++r) vals[r] = sups[r * npairs + pi];
            const auto ms = mean_se(drop_blowups(vals, blown, "volume_convergence"));
            if (volumes[a] == volumes[b]) continue;
            out.d[a * nv + b] = out.d[b * nv + a] = ms.mean;
            out.se[a * nv + b] = out.se[b * nv + a] = ms.se;
        }
    return out;
}

std::vector<ContinuityRow> initial_continuity(const SpinChainModel& model, std::span<const double> x,
                                              std::span<const double> deltas, std::size_t k, double T1,
                                              std::size_t replicas, std::uint64_t seed, std::size_t directions,
                                              const SiteWeight& rho, const EnsembleOptions& options) {
    const std::size_t n = model.volume();
    if (x.size() != n) throw UsageError("initial_continuity: initial state does not match the volume");
    if (k == 0 || k > n) throw UsageError("initial_continuity: k must lie in 1..volume");
    if (directions == 0) throw UsageError("initial_continuity: at least one direction required");
    for (double d : deltas)
        if (!(d >= 0.0)) throw UsageError("initial_continuity: perturbation sizes must be nonnegative");

    const WeightedNormSpec l2(2.0, rho);
    std::vector<std::vector<double>> dirs;
    const CounterRng drng(derive_seed(seed, 0xD1EC), 0);
    for (std::size_t j = 0; j < directions; ++j) {
        std::vector<double> u(n);
        drng.fill_normal(j * n, u);
        const double norm = weighted_norm(u, l2);
        for (auto& v : u) v /= norm;
        dirs.push_back(std::move(u));
    }

    const std::size_t steps = grid_index(T1, options.h);
    const CoefficientSchedule schedule(model, options.h, options.start_time);
    const double sqrt_h = std::sqrt(options.h) * options.noise_scale;
    const std::size_t ncase = deltas.size() * directions;
    std::vector<double> sups(replicas * ncase, 0.0);
    std::vector<unsigned char> blown(replicas, 0);

    for_each_replica(replicas, options.backend, [&](std::size_t r) {
        const StreamNoise noise{CounterRng(seed, options.first_stream + r), sqrt_h};
        std::vector<double> base((steps + 1) * k);
        std::vector<double> s(x.begin(), x.end()), work(n);
        std::copy(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), base.begin());
        bool ok = integrate(model.drift(), schedule, options.scheme, noise, 0, steps, s, work,
                            [&](std::size_t step, std::span<const double> st) {
                                std::copy(st.begin(), st.begin() + static_cast<std::ptrdiff_t>(k),
                                          base.begin() + static_cast<std::ptrdiff_t>(step * k));
                                return true;
                            });
        for (std::size_t di = 0; ok && di < deltas.size(); ++di)
            for (std::size_t j = 0; ok && j < directions; ++j) {
                for (std::size_t i = 0; i < n; ++i) s[i] = x[i] + deltas[di] * dirs[j][i];
                auto diff = [&](std::size_t step, std::span<const double> st) {
                    double d = 0.0;
                    for (std::size_t i = 0; i < k; ++i) {
                        const double e = st[i] - base[step * k + i];
                        d += e * e;
                    }
                    return d;
                };
                double best = diff(0, s);
                ok = integrate(model.drift(), schedule, options.scheme, noise, 0, steps, s, work,
                               [&](std::size_t step, std::span<const double> st) {
                                   best = std::max(best, diff(step, st));
                                   return true;
                               });
                sups[r * ncase + di * directions + j] = best;
            }
        blown[r] = !ok;
    });

    std::vector<ContinuityRow> rows;
    for (std::size_t di = 0; di < deltas.size(); ++di) {
        ContinuityRow row;
        row.delta = deltas[di];
        row.estimate = -1.0;
        for (std::size_t j = 0; j < directions; ++j) {
            std::vector<double> vals(replicas);
            for (std::size_t r = 0; r < replicas; ++r) vals[r] = sups[r * ncase + di * directions + j];
            const auto ms = mean_se(drop_blowups(vals, blown, "initial_continuity"));
            if (ms.mean > row.estimate) {
                row.estimate = ms.mean;
                row.se = ms.se;
                row.worst_direction = j;
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<double> tightness_box(const SiteWeight& v, const DriftConstants& c, double eps, std::size_t sites) {
    if (!(eps > 0.0)) throw UsageError("tightness: eps must be positive");
    const double C = 2.0 * c.theta * c.eta * v.total();
    std::vector<double> b(sites);
    for (std::size_t i = 1; i <= sites; ++i)
        b[i - 1] = std::pow((C + 1.0) / (eps * v(i)) + C / v(i), 1.0 / (2.0 * c.theta));
    return b;
}

std::vector<TightnessRow> tightness_diagnostic(std::span<const EmpiricalMeasure* const> measures,
                                               const WeightFamily& weights, const DriftConstants& constants,
                                               std::span<const double> eps_ladder) {
    if (!weights.v) throw UsageError("tightness_diagnostic: the weight family has no auxiliary weight v");
    if (measures.empty()) throw UsageError("tightness_diagnostic: no measures");
    std::vector<TightnessRow> rows;
    for (double eps : eps_ladder) {
        TightnessRow row;
        row.eps = eps;
        for (const auto* m : measures) {
            const auto box = tightness_box(*weights.v, constants, eps, m->volume());
            double inside = 1.0;
            for (std::size_t i = 0; i < m->volume(); ++i) {
                std::size_t out = 0;
                for (std::size_t k = 0; k < m->sample_count(); ++k) out += std::abs(m->sample(k)[i]) > box[i];
                inside *= 1.0 - static_cast<double>(out) / static_cast<double>(m->sample_count());
            }
            row.masses.push_back(1.0 - inside);
            row.sup_mass = std::max(row.sup_mass, 1.0 - inside);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace latticespin
