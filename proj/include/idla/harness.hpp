#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "idla/cluster.hpp"
#include "idla/increments.hpp"
#include "idla/ladder.hpp"
#include "idla/rng.hpp"
#include "idla/theory.hpp"
#include "idla/version.hpp"
#include "idla/walker.hpp"

namespace idla {

struct EstimateWithError {
    double point = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN(); // NaN when unavailable
    std::uint64_t replicas = 0;
    nlohmann::json tallies; // raw tallies backing the estimate

    bool has_se() const { return std::isfinite(se); }
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["point"] = point;
        if (has_se())
            j["se"] = se;
        else
            j["se"] = nullptr;
        j["replicas"] = replicas;
        j["tallies"] = tallies;
        return j;
    }
};

inline EstimateWithError bernoulli_estimate(std::uint64_t successes, std::uint64_t n) {
    EstimateWithError e;
    e.replicas = n;
    e.point = static_cast<double>(successes) / static_cast<double>(n);
    if (n > 1) e.se = std::sqrt(e.point * (1.0 - e.point) / static_cast<double>(n));
    e.tallies = {{"successes", successes}, {"trials", n}};
    return e;
}

inline EstimateWithError mean_estimate(const std::vector<double>& values) {
    EstimateWithError e;
    e.replicas = values.size();
    double m = 0.0;
    for (double v : values) m += v;
    m /= static_cast<double>(values.size());
    e.point = m;
    if (values.size() > 1) {
        double var = 0.0;
        for (double v : values) var += (v - m) * (v - m);
        var /= static_cast<double>(values.size() - 1);
        e.se = std::sqrt(var / static_cast<double>(values.size()));
    }
    e.tallies = {{"sum", m * static_cast<double>(values.size())}, {"count", values.size()}};
    return e;
}

struct Verdict {
    bool pass = false;
    double z = std::numeric_limits<double>::quiet_NaN();
    double estimate = 0.0;
    double theory = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
    double slack = 0.0;
    std::string label;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["pass"] = pass;
        j["estimate"] = estimate;
        j["theory"] = theory;
        j["slack"] = slack;
        j["se"] = std::isfinite(se) ? nlohmann::json(se) : nlohmann::json(nullptr);
        j["z"] = std::isfinite(z) ? nlohmann::json(z) : nlohmann::json(nullptr);
        j["label"] = label;
        return j;
    }
};

// Acceptance rule: pass iff |estimate - theory| <= 3 SE + slack. The additive
// slack absorbs finite-size bias when comparing against limit values.
inline Verdict compare(const EstimateWithError& est, double theory_value, double slack,
                       std::string label = {}) {
    Verdict v;
    v.estimate = est.point;
    v.theory = theory_value;
    v.slack = slack;
    v.se = est.se;
    v.label = std::move(label);
    const double dev = std::abs(est.point - theory_value);
    if (est.has_se()) {
        v.z = est.se > 0.0 ? dev / est.se : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        v.pass = dev <= 3.0 * est.se + slack;
    } else {
        if (slack <= 0.0)
            throw std::invalid_argument("compare: no SE available and slack is not positive");
        v.pass = dev <= slack;
    }
    return v;
}

inline double tv_distance(const std::map<long long, double>& p,
                          const std::map<long long, double>& q) {
    double d = 0.0;
    auto it = q.begin();
    for (const auto& [k, pk] : p) {
        while (it != q.end() && it->first < k) {
            d += it->second;
            ++it;
        }
        if (it != q.end() && it->first == k) {
            d += std::abs(pk - it->second);
            ++it;
        } else {
            d += pk;
        }
    }
    for (; it != q.end(); ++it) d += it->second;
    return 0.5 * d;
}

inline double chi_square_pvalue(double statistic, int dof) {
    if (dof < 1) throw std::invalid_argument("chi_square_pvalue: dof must be >= 1");
    boost::math::chi_squared dist(dof);
    return boost::math::cdf(boost::math::complement(dist, statistic));
}

// Run f(replica) for each replica index, spread over worker threads. Results
// must be written into replica-indexed slots so aggregation order is fixed.
// CapExceeded failures are collected per replica and reported together.
class ReplicaCapFailures : public std::runtime_error {
  public:
    ReplicaCapFailures(std::vector<std::uint64_t> indices)
        : std::runtime_error("step cap exceeded in " + std::to_string(indices.size()) +
                             " replica(s), first at replica " +
                             std::to_string(indices.empty() ? 0 : indices.front())),
          replicas(std::move(indices)) {}
    std::vector<std::uint64_t> replicas;
};

inline unsigned default_thread_count() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

template <class F>
void parallel_replicas(std::uint64_t n, unsigned threads, F&& f) {
    threads = std::max(1u, std::min<unsigned>(threads, n == 0 ? 1 : static_cast<unsigned>(std::min<std::uint64_t>(n, 64))));
    std::atomic<std::uint64_t> next{0};
    std::mutex err_mu;
    std::vector<std::uint64_t> cap_failures;
    std::exception_ptr fatal;
    auto worker = [&]() {
        for (;;) {
            const std::uint64_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (const CapExceeded&) {
                std::lock_guard lock(err_mu);
                cap_failures.push_back(i);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!fatal) fatal = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (fatal) std::rethrow_exception(fatal);
    if (!cap_failures.empty()) {
        std::sort(cap_failures.begin(), cap_failures.end());
        throw ReplicaCapFailures(std::move(cap_failures));
    }
}

// ---------------------------------------------------------------------------
// Law presets

inline IncrementLaw law_from_spec(const std::string& spec) {
    if (spec == "simple") return IncrementLaw::simple();
    if (spec == "twostep")
        return IncrementLaw::finite_table({-2, -1, 1, 2}, {0.25, 0.25, 0.25, 0.25});
    if (spec == "skipfree")
        return IncrementLaw::finite_table({-2, 1}, {1.0 / 3.0, 2.0 / 3.0});
    if (spec.rfind("stable", 0) == 0) {
        double alpha = 1.5;
        if (spec.size() > 6) {
            std::string rest = spec.substr(6);
            if (!rest.empty() && rest.front() == ':') rest.erase(0, 1);
            if (rest == "15" || rest.empty()) {
                alpha = 1.5;
            } else {
                alpha = std::stod(rest);
            }
        }
        return IncrementLaw::stable_tail(alpha);
    }
    // otherwise treat as a path to a JSON law spec
    std::ifstream in(spec);
    if (!in) throw std::invalid_argument("unknown law preset or unreadable file: " + spec);
    nlohmann::json j;
    in >> j;
    return IncrementLaw::from_json(j);
}

inline std::vector<std::string> law_preset_names() {
    return {"simple", "twostep", "skipfree", "stable15"};
}

// ---------------------------------------------------------------------------
// Experiment documents

struct DocumentMeta {
    double wall_time_ms = 0.0;
};

// Everything outside "meta" is a pure function of (config, seed); the
// determinism contract ("byte-identical documents") applies to the document
// with "meta" removed.
inline nlohmann::json finish_document(nlohmann::json doc, const DocumentMeta& meta) {
    doc["meta"] = {{"version", kVersion}, {"wall_time_ms", meta.wall_time_ms}};
    return doc;
}

inline nlohmann::json strip_meta(nlohmann::json doc) {
    doc.erase("meta");
    return doc;
}

class Stopwatch {
  public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
            .count();
    }

  private:
    std::chrono::steady_clock::time_point t0_;
};

// ---------------------------------------------------------------------------
// Gambler's ruin: probability of exiting [-cN, N] on the right.
// Non-integer left endpoints are floored toward the interior: a = ceil(-cN).

struct GamblerConfig {
    long long N = 500;
    double c = 1.0;
    std::uint64_t replicas = 100000;
    std::uint64_t seed = 1;
    std::uint64_t step_cap = kDefaultStepCap;
    unsigned threads = default_thread_count();
    double slack = 0.0; // absolute slack when comparing to the limit
};

struct GamblerResult {
    EstimateWithError exit_right;
    Verdict verdict;
    nlohmann::json document;
};

inline GamblerResult gambler_experiment(const IncrementLaw& law, const GamblerConfig& cfg) {
    Stopwatch watch;
    const long long a = static_cast<long long>(std::ceil(-cfg.c * static_cast<double>(cfg.N)));
    const long long b = cfg.N;
    std::vector<std::uint8_t> right(cfg.replicas, 0);
    parallel_replicas(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
        RandomStream rng = RandomStream::child(cfg.seed, i);
        const auto out = run_until_exit(law, 0, a, b, rng, cfg.step_cap);
        right[i] = out.verdict == WalkVerdict::ExitedRight ? 1 : 0;
    });
    std::uint64_t wins = 0;
    for (auto v : right) wins += v;
    GamblerResult res;
    res.exit_right = bernoulli_estimate(wins, cfg.replicas);
    const double limit = theory::gambler_limit(law.alpha(), cfg.c);
    res.verdict = compare(res.exit_right, limit, cfg.slack, "exit-right frequency vs limit");

    nlohmann::json doc;
    doc["experiment"] = "gambler";
    doc["config"] = {{"law", law.to_json()}, {"N", cfg.N},       {"c", cfg.c},
                     {"replicas", cfg.replicas}, {"seed", cfg.seed}, {"step_cap", cfg.step_cap},
                     {"slack", cfg.slack},   {"interval", {a, b}}};
    doc["results"] = {{"exit_right", res.exit_right.to_json()},
                      {"theory", limit},
                      {"verdicts", nlohmann::json::array({res.verdict.to_json()})}};
    res.document = finish_document(std::move(doc), {watch.ms()});
    return res;
}

// ---------------------------------------------------------------------------
// Hitting-before-exit: walk from `start`, does it hit `target` before leaving
// [-cN, N]?

struct HitProbConfig {
    long long N = 2000;
    double c = 1.0;
    std::optional<long long> start; // default floor(N/2)
    long long target = 0;
    std::uint64_t replicas = 20000;
    std::uint64_t seed = 1;
    std::uint64_t step_cap = kDefaultStepCap;
    unsigned threads = default_thread_count();
    double slack = 0.02;
};

struct HitProbResult {
    EstimateWithError hit;
    Verdict verdict;
    nlohmann::json document;
};

inline HitProbResult hitprob_experiment(const IncrementLaw& law, const HitProbConfig& cfg) {
    Stopwatch watch;
    const long long start = cfg.start.value_or(cfg.N / 2);
    const long long a = static_cast<long long>(std::ceil(-cfg.c * static_cast<double>(cfg.N)));
    const long long b = cfg.N;
    std::vector<std::uint8_t> hits(cfg.replicas, 0);
    parallel_replicas(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
        RandomStream rng = RandomStream::child(cfg.seed, i);
        const auto out = run_hit_or_exit(law, start, cfg.target, a, b, rng, cfg.step_cap);
        hits[i] = out.verdict == WalkVerdict::HitTarget ? 1 : 0;
    });
    std::uint64_t wins = 0;
    for (auto v : hits) wins += v;
    HitProbResult res;
    res.hit = bernoulli_estimate(wins, cfg.replicas);
    const double y = static_cast<double>(start) / static_cast<double>(cfg.N);
    const double limit = law.alpha() == 2.0 ? theory::q2(y, cfg.c)
                                            : theory::q_alpha(law.alpha(), y, cfg.c);
    res.verdict = compare(res.hit, limit, cfg.slack, "hit frequency vs limit");

    nlohmann::json doc;
    doc["experiment"] = "hitprob";
    doc["config"] = {{"law", law.to_json()},     {"N", cfg.N},
                     {"c", cfg.c},               {"start", start},
                     {"target", cfg.target},     {"replicas", cfg.replicas},
                     {"seed", cfg.seed},         {"step_cap", cfg.step_cap},
                     {"slack", cfg.slack},       {"interval", {a, b}}};
    doc["results"] = {{"hit", res.hit.to_json()},
                      {"theory", limit},
                      {"verdicts", nlohmann::json::array({res.verdict.to_json()})}};
    res.document = finish_document(std::move(doc), {watch.ms()});
    return res;
}

// ---------------------------------------------------------------------------
// Overshoot experiment: first-passage overshoots over a geometric window of
// levels [y, window_factor*y], pooled across independent paths. Fresh-path
// first-passage times have a universal t^{-1/2} tail, so per-sample fresh
// walks are not runnable at large y; pooling a window from each path keeps
// the estimator unbiased (each crossing is an exact first passage) while the
// per-path SE stays honest under within-path correlation.

struct OvershootConfig {
    long long y = 10000;
    double window_factor = 2.0;
    std::size_t levels = 256;
    std::size_t paths = 64;
    std::vector<double> u_grid = {0.5, 1.0, 2.0};
    std::uint64_t seed = 1;
    std::uint64_t step_cap = kDefaultStepCap;
    unsigned threads = default_thread_count();
    double slack = 0.01;
};

struct OvershootResult {
    struct TailRow {
        double u = 0.0;
        EstimateWithError prob; // P(Z_l / l > u) pooled over the window
        Verdict verdict;        // vs the Dynkin-Lamperti tail (stable laws only)
    };
    std::vector<TailRow> tails;
    EstimateWithError mean_z;
    std::map<long long, double> z_pmf;
    std::size_t samples = 0;
    double censored_fraction = 0.0;
    nlohmann::json document;
};

inline OvershootResult overshoot_experiment(const IncrementLaw& law, const OvershootConfig& cfg) {
    Stopwatch watch;
    const auto levels = geometric_levels(cfg.y, cfg.window_factor, cfg.levels);
    std::vector<MultiPassage> per_path(cfg.paths);
    parallel_replicas(cfg.paths, cfg.threads, [&](std::uint64_t i) {
        RandomStream rng = RandomStream::child(cfg.seed, i);
        per_path[i] = first_passage_multi(law, 0, levels, rng, cfg.step_cap);
    });

    OvershootResult res;
    std::size_t censored = 0, possible = 0;
    std::map<long long, std::uint64_t> z_counts;
    std::uint64_t z_total = 0;
    std::vector<double> path_mean_z;
    for (const auto& mp : per_path) {
        possible += levels.size();
        censored += levels.size() - mp.crossed;
        if (mp.crossed == 0) continue;
        double accz = 0.0;
        for (std::size_t j = 0; j < mp.crossed; ++j) {
            ++z_counts[mp.overshoots[j]];
            ++z_total;
            accz += static_cast<double>(mp.overshoots[j]);
        }
        path_mean_z.push_back(accz / static_cast<double>(mp.crossed));
    }
    if (path_mean_z.empty())
        throw std::runtime_error("overshoot_experiment: no path crossed the first level");
    res.samples = static_cast<std::size_t>(z_total);
    res.censored_fraction = static_cast<double>(censored) / static_cast<double>(possible);
    for (const auto& [z, c] : z_counts)
        res.z_pmf[z] = static_cast<double>(c) / static_cast<double>(z_total);
    res.mean_z = mean_estimate(path_mean_z);

    nlohmann::json tail_rows = nlohmann::json::array();
    for (double u : cfg.u_grid) {
        std::vector<double> path_means;
        for (const auto& mp : per_path) {
            if (mp.crossed == 0) continue;
            double acc = 0.0;
            for (std::size_t j = 0; j < mp.crossed; ++j)
                if (static_cast<double>(mp.overshoots[j]) >
                    u * static_cast<double>(levels[j]))
                    acc += 1.0;
            path_means.push_back(acc / static_cast<double>(mp.crossed));
        }
        OvershootResult::TailRow row;
        row.u = u;
        row.prob = mean_estimate(path_means);
        if (law.kind() == LawKind::StableTail) {
            const double limit = theory::dynkin_lamperti_tail(law.alpha(), u);
            row.verdict = compare(row.prob, limit, cfg.slack,
                                  "P(Z/y > " + std::to_string(u) + ") vs limit tail");
        } else {
            row.verdict.pass = true;
            row.verdict.label = "no limit comparison for finite-variance law";
            row.verdict.estimate = row.prob.point;
        }
        tail_rows.push_back({{"u", u},
                             {"prob", row.prob.to_json()},
                             {"verdict", row.verdict.to_json()}});
        res.tails.push_back(std::move(row));
    }

    nlohmann::json doc;
    doc["experiment"] = "overshoot";
    doc["config"] = {{"law", law.to_json()},
                     {"y", cfg.y},
                     {"window_factor", cfg.window_factor},
                     {"levels", cfg.levels},
                     {"paths", cfg.paths},
                     {"u_grid", cfg.u_grid},
                     {"seed", cfg.seed},
                     {"step_cap", cfg.step_cap},
                     {"slack", cfg.slack}};
    nlohmann::json pmf_json = nlohmann::json::array();
    for (const auto& [z, p] : res.z_pmf) pmf_json.push_back({z, p});
    doc["results"] = {{"tails", tail_rows},
                      {"mean_z", res.mean_z.to_json()},
                      {"z_pmf", pmf_json},
                      {"samples", res.samples},
                      {"censored_fraction", res.censored_fraction}};
    res.document = finish_document(std::move(doc), {watch.ms()});
    return res;
}

// ---------------------------------------------------------------------------
// Ladder experiment: harvest ladder heights, build the stationary residual
// law, run the residual chain against it, and evaluate the Spitzer series for
// finite-variance laws.

struct LadderConfig {
    std::size_t samples = 20000;
    std::size_t chain_horizon = 1000000;
    std::size_t chain_subsample = 16; // decorrelation stride for the chi-square
    int spitzer_n_max = 4000;
    std::uint64_t seed = 1;
    std::uint64_t step_cap = kDefaultStepCap;
};

struct LadderResult {
    LadderStatistics stats;
    double chain_chi2 = 0.0;
    double chain_pvalue = 1.0;
    nlohmann::json document;
};

inline LadderResult ladder_experiment(const IncrementLaw& law, const LadderConfig& cfg) {
    Stopwatch watch;
    RandomStream rng = RandomStream::child(cfg.seed, 0);
    LadderResult res;
    const auto samples = sample_ladder_heights(law, cfg.samples, rng, cfg.step_cap);
    res.stats.ladder_heights = pmf_from_samples(samples);
    long double mu = 0.0L;
    for (long long y : samples) mu += y;
    res.stats.mu_empirical = static_cast<double>(mu / samples.size());
    res.stats.stationary = stationary_distributions(res.stats.ladder_heights);

    // occupation frequencies of the residual chain driven by the empirical pmf,
    // subsampled for decorrelation, against pi from the same pmf
    {
        detail::AliasTable table;
        std::vector<long long> vals;
        std::vector<double> ps;
        for (const auto& [v, p] : res.stats.ladder_heights) {
            vals.push_back(v);
            ps.push_back(p);
        }
        table.build(vals, ps);
        RandomStream chain_rng = RandomStream::child(cfg.seed, 1);
        auto z = residual_chain([&] { return table.draw(chain_rng); }, cfg.chain_horizon);
        std::map<long long, std::uint64_t> occ;
        std::uint64_t n_used = 0;
        for (std::size_t i = 1; i <= cfg.chain_horizon; i += cfg.chain_subsample) {
            ++occ[z[i]];
            ++n_used;
        }
        double chi2 = 0.0;
        int cells = 0;
        for (const auto& [k, pk] : res.stats.stationary.pi) {
            const double expected = pk * static_cast<double>(n_used);
            if (expected < 5.0) continue; // fold tiny cells out of the statistic
            const double observed =
                occ.count(k) ? static_cast<double>(occ.at(k)) : 0.0;
            chi2 += (observed - expected) * (observed - expected) / expected;
            ++cells;
        }
        res.chain_chi2 = chi2;
        res.chain_pvalue = cells > 1 ? chi_square_pvalue(chi2, cells - 1) : 1.0;
    }

    if (law.finite_variance()) {
        res.stats.spitzer = spitzer_mu(law, cfg.spitzer_n_max);
        res.stats.has_spitzer = true;
    }

    nlohmann::json doc;
    doc["experiment"] = "ladder";
    doc["config"] = {{"law", law.to_json()},
                     {"samples", cfg.samples},
                     {"chain_horizon", cfg.chain_horizon},
                     {"chain_subsample", cfg.chain_subsample},
                     {"spitzer_n_max", cfg.spitzer_n_max},
                     {"seed", cfg.seed},
                     {"step_cap", cfg.step_cap}};
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& [v, p] : res.stats.ladder_heights) hist.push_back({v, p});
    nlohmann::json results;
    results["y_histogram"] = hist;
    results["mu_empirical"] = res.stats.mu_empirical;
    results["mu_from_pmf"] = res.stats.stationary.mu;
    results["chain_chi2"] = res.chain_chi2;
    results["chain_pvalue"] = res.chain_pvalue;
    if (res.stats.has_spitzer) {
        results["spitzer"] = {{"raw", res.stats.spitzer.raw},
                              {"corrected", res.stats.spitzer.corrected},
                              {"last_term", res.stats.spitzer.last_term},
                              {"n_max", cfg.spitzer_n_max}};
    }
    doc["results"] = results;
    res.document = finish_document(std::move(doc), {watch.ms()});
    return res;
}

// ---------------------------------------------------------------------------
// IDLA growth experiment.

struct IdlaConfig {
    long long m = 2000;
    std::vector<long long> checkpoints; // defaults to {m/4, m/2, m}
    std::uint64_t replicas = 20;
    std::uint64_t seed = 1;
    RunLimits limits;
    unsigned threads = default_thread_count();
    long long coverage_x_min = 100; // sigma_x / x diagnostics cover x >= this
};

struct IdlaResult {
    // replica-major: per_replica[i].checkpoints aligned with config checkpoints
    std::vector<RunResult> per_replica;
    std::vector<EstimateWithError> r_over_m; // one per checkpoint, replica-mean
    double min_sigma_ratio = std::numeric_limits<double>::infinity(); // over x >= x_min
    double max_sigma_ratio = 0.0;
    bool interval_always = true;
    nlohmann::json document;
};

inline IdlaResult idla_experiment(const IncrementLaw& law, const IdlaConfig& cfg) {
    Stopwatch watch;
    std::vector<long long> cps = cfg.checkpoints;
    if (cps.empty()) cps = {cfg.m / 4, cfg.m / 2, cfg.m};
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());

    IdlaResult res;
    res.per_replica.resize(cfg.replicas);
    parallel_replicas(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
        Cluster cluster;
        const std::uint64_t run_seed = mix64(cfg.seed ^ mix64(i + 1));
        res.per_replica[i] = run_cluster(cluster, law, cfg.m, run_seed, cps, cfg.limits);
    });

    for (std::size_t ci = 0; ci < cps.size(); ++ci) {
        std::vector<double> ratios;
        ratios.reserve(cfg.replicas);
        for (const auto& rr : res.per_replica)
            ratios.push_back(static_cast<double>(rr.checkpoints[ci].r) /
                             static_cast<double>(rr.checkpoints[ci].m));
        res.r_over_m.push_back(mean_estimate(ratios));
    }
    for (const auto& rr : res.per_replica) {
        res.interval_always = res.interval_always && rr.interval_at_every_dispatch;
        for (const auto& [x, sx] : rr.coverage) {
            if (x < cfg.coverage_x_min) continue;
            const double ratio = static_cast<double>(sx) / static_cast<double>(x);
            res.min_sigma_ratio = std::min(res.min_sigma_ratio, ratio);
            res.max_sigma_ratio = std::max(res.max_sigma_ratio, ratio);
        }
    }

    nlohmann::json doc;
    doc["experiment"] = "idla";
    doc["config"] = {{"law", law.to_json()},
                     {"m", cfg.m},
                     {"checkpoints", cps},
                     {"replicas", cfg.replicas},
                     {"seed", cfg.seed},
                     {"per_walk_step_cap", cfg.limits.per_walk_step_cap},
                     {"global_step_budget", cfg.limits.global_step_budget},
                     {"coverage_x_min", cfg.coverage_x_min}};
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& rr : res.per_replica) runs.push_back(rr.to_json());
    nlohmann::json ratios = nlohmann::json::array();
    for (std::size_t ci = 0; ci < cps.size(); ++ci)
        ratios.push_back({{"m", cps[ci]}, {"r_over_m", res.r_over_m[ci].to_json()}});
    doc["results"] = {{"r_over_m", ratios},
                      {"interval_always", res.interval_always},
                      {"sigma_ratio_min", res.min_sigma_ratio},
                      {"sigma_ratio_max", res.max_sigma_ratio},
                      {"runs", runs}};
    res.document = finish_document(std::move(doc), {watch.ms()});
    return res;
}

// ---------------------------------------------------------------------------
// Recorded-run diagnostics: the N/K window counters. A "recorded" run here
// means the per-walker streams are recoverable from the run seed, so walks can
// be replayed and extended past their settling step with the walker's own
// stream.

struct WindowCounters {
    long long t = 0;
    std::uint64_t n_plus = 0;
    std::uint64_t n_minus = 0;
    std::uint64_t n_total = 0; // computed independently of x; equals n_plus + n_minus
    std::uint64_t k_plus = 0;  // for site +t
    std::uint64_t k_minus = 0; // for site -t
    bool in_cluster_before = false; // t was already occupied at time m
    bool entered_window = false;    // t joined the cluster among walkers (m, m+k]
};

struct DiagnosticsQuery {
    long long m = 0;  // window start: walkers (m, m+k]
    long long k = 0;
    long long x = 0;  // interval half-width
    double s = 2.0;   // extended interval factor
    std::vector<long long> ts; // positive target sites (counters also cover -t)
};

// Replays the run from scratch (deterministic in run_seed) and evaluates all
// counters in one pass over walkers (m, m+k]. Each walk is extended until its
// exit from [-x,x], [-x,sx] and [-sx,x] are all observed.
inline std::vector<WindowCounters> idla_window_counters(const IncrementLaw& law,
                                                        std::uint64_t run_seed,
                                                        const DiagnosticsQuery& q,
                                                        const RunLimits& limits = {}) {
    if (q.m < 0 || q.k < 1 || q.x < 1 || !(q.s > 1.0))
        throw std::invalid_argument("idla_window_counters: need m >= 0, k >= 1, x >= 1, s > 1");
    const long long sx = static_cast<long long>(std::floor(q.s * static_cast<double>(q.x)));
    std::vector<WindowCounters> counters(q.ts.size());
    for (std::size_t i = 0; i < q.ts.size(); ++i) {
        if (q.ts[i] < 1) throw std::invalid_argument("idla_window_counters: targets must be >= 1");
        counters[i].t = q.ts[i];
    }
    // map |site| -> target index for fast per-step lookup
    std::map<long long, std::size_t> target_of;
    for (std::size_t i = 0; i < q.ts.size(); ++i) target_of[q.ts[i]] = i;

    Cluster cluster;
    for (long long j = 1; j <= q.m; ++j) {
        RandomStream rng = RandomStream::child(run_seed, static_cast<std::uint64_t>(j));
        cluster.dispatch_one(law, rng, limits.per_walk_step_cap);
    }
    std::vector<std::uint8_t> in_before(q.ts.size());
    for (std::size_t i = 0; i < q.ts.size(); ++i)
        in_before[i] = cluster.contains(q.ts[i]) ? 1 : 0;

    for (long long j = q.m + 1; j <= q.m + q.k; ++j) {
        RandomStream rng = RandomStream::child(run_seed, static_cast<std::uint64_t>(j));
        law.with_drawer(rng, [&](auto& d) {
            long long s_pos = 0;
            std::uint64_t n = 0;
            bool settled = false;
            long long settle_site = 0;
            int exit_x_side = 0;          // -1 left, +1 right, 0 unseen
            bool eta_plus_seen = false;   // exited [-x, sx]
            bool eta_minus_seen = false;  // exited [-sx, x]
            // first-visit flags: +t up to the settling step inclusive (the
            // T <= eta_cluster convention), +t strictly before exiting [-x,sx],
            // and -t strictly before exiting [-sx,x]
            std::vector<std::uint8_t> visit_t_pre_settle(q.ts.size(), 0);
            std::vector<std::uint8_t> visit_t_pre_eta_plus(q.ts.size(), 0);
            std::vector<std::uint8_t> visit_negt_pre_eta_minus(q.ts.size(), 0);
            for (;;) {
                if (n >= limits.per_walk_step_cap) throw CapExceeded(s_pos, n);
                s_pos += d.next();
                ++n;
                const bool settles_now = !settled && !cluster.contains(s_pos);
                // exit observations first: the eta events are strict (<), and
                // the exit site of either extended interval can never be one
                // of the tracked sites (targets lie inside both intervals)
                if (exit_x_side == 0 && (s_pos < -q.x || s_pos > q.x))
                    exit_x_side = s_pos > q.x ? 1 : -1;
                if (!eta_plus_seen && (s_pos < -q.x || s_pos > sx)) eta_plus_seen = true;
                if (!eta_minus_seen && (s_pos < -sx || s_pos > q.x)) eta_minus_seen = true;
                const long long apos = s_pos < 0 ? -s_pos : s_pos;
                if (auto it = target_of.find(apos); it != target_of.end()) {
                    const std::size_t i = it->second;
                    if (s_pos > 0) {
                        if (!settled) visit_t_pre_settle[i] = 1; // includes the settling step
                        if (!eta_plus_seen) visit_t_pre_eta_plus[i] = 1;
                    } else if (!eta_minus_seen) {
                        visit_negt_pre_eta_minus[i] = 1;
                    }
                }
                if (settles_now) {
                    settled = true;
                    settle_site = s_pos;
                }
                if (settled && exit_x_side != 0 && eta_plus_seen && eta_minus_seen) break;
            }
            for (std::size_t i = 0; i < q.ts.size(); ++i) {
                if (visit_t_pre_settle[i]) {
                    ++counters[i].n_total;
                    if (exit_x_side == 1) ++counters[i].n_plus;
                    if (exit_x_side == -1) ++counters[i].n_minus;
                }
                if (exit_x_side == 1 && visit_t_pre_eta_plus[i]) ++counters[i].k_plus;
                if (exit_x_side == -1 && visit_negt_pre_eta_minus[i]) ++counters[i].k_minus;
            }
            cluster.settle_external(settle_site);
        });
    }
    for (std::size_t i = 0; i < q.ts.size(); ++i) {
        counters[i].in_cluster_before = in_before[i] != 0;
        counters[i].entered_window = !in_before[i] && cluster.contains(q.ts[i]);
    }
    return counters;
}

} // namespace idla
