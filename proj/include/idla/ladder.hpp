#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "idla/increments.hpp"
#include "idla/rng.hpp"
#include "idla/walker.hpp"

namespace idla {

// pmf on the positive integers as sorted (value, probability) pairs
using IntPmf = std::vector<std::pair<long long, double>>;

inline IntPmf pmf_from_samples(const std::vector<long long>& samples) {
    std::map<long long, std::uint64_t> counts;
    for (long long v : samples) ++counts[v];
    IntPmf pmf;
    pmf.reserve(counts.size());
    for (const auto& [v, c] : counts)
        pmf.emplace_back(v, static_cast<double>(c) / static_cast<double>(samples.size()));
    return pmf;
}

// Harvest `count` i.i.d. ascending ladder increments from one long path:
// successive increments of the running maximum at strict-ascent epochs. The
// step cap applies per epoch.
inline std::vector<long long> sample_ladder_heights(const IncrementLaw& law, std::size_t count,
                                                    RandomStream& rng,
                                                    std::uint64_t step_cap = kDefaultStepCap) {
    std::vector<long long> out;
    out.reserve(count);
    law.with_drawer(rng, [&](auto& d) {
        long long s = 0;
        long long running_max = 0;
        std::uint64_t n = 0;
        while (out.size() < count) {
            if (n >= step_cap) throw CapExceeded(s, n);
            s += d.next();
            ++n;
            if (s > running_max) {
                out.push_back(s - running_max);
                running_max = s;
                n = 0;
            }
        }
    });
    return out;
}

// Residual-lifetime chain on {1, 2, ...}: Z_0 = 1; the state decrements until
// it hits 1, then renews with a fresh ladder draw. With a shared ladder
// stream, chain[y+1] equals the walk's overshoot over level y (the index
// shift comes from the Z_0 = 1 rooting convention).
template <class YSampler>
std::vector<long long> residual_chain(YSampler&& next_y, std::size_t horizon) {
    std::vector<long long> z(horizon + 1);
    z[0] = 1;
    for (std::size_t i = 1; i <= horizon; ++i) {
        if (z[i - 1] >= 2) {
            z[i] = z[i - 1] - 1;
        } else {
            const long long y = next_y();
            if (y < 1) throw std::invalid_argument("residual_chain: Y sampler returned < 1");
            z[i] = y;
        }
    }
    return z;
}

struct StationaryDistributions {
    IntPmf pi;  // stationary residual law: pi_k = P(Y >= k) / mu, dense on 1..max
    IntPmf psi; // size-biased ladder law: psi_k = k P(Y = k) / mu
    double mu = 0.0;
    double pi_renorm = 0.0;  // |1 - sum| before renormalization
    double psi_renorm = 0.0;
    bool renorm_flagged = false;
};

inline StationaryDistributions stationary_distributions(const IntPmf& y_pmf,
                                                        double tail_tolerance = 1e-9) {
    if (y_pmf.empty()) throw std::invalid_argument("stationary_distributions: empty pmf");
    double mass = 0.0;
    for (const auto& [v, p] : y_pmf) {
        if (v < 1) throw std::invalid_argument("stationary_distributions: support must be >= 1");
        if (!(p >= 0.0)) throw std::invalid_argument("stationary_distributions: negative mass");
        mass += p;
    }
    if (mass < 1.0 - tail_tolerance)
        throw std::invalid_argument("stationary_distributions: pmf mass " +
                                    std::to_string(mass) + " below 1 - tail_tolerance");
    StationaryDistributions out;
    long double mu = 0.0L;
    for (const auto& [v, p] : y_pmf) mu += static_cast<long double>(v) * p;
    out.mu = static_cast<double>(mu);
    if (!std::isfinite(out.mu) || out.mu <= 0.0)
        throw std::invalid_argument("stationary_distributions: mean ladder height not finite");

    const long long kmax = y_pmf.back().first;
    out.pi.reserve(static_cast<std::size_t>(kmax));
    // P(Y >= k) by downward accumulation over the dense range
    {
        double tail = mass;
        std::size_t idx = 0;
        double pi_sum = 0.0;
        std::vector<double> vals(static_cast<std::size_t>(kmax));
        for (long long k = 1; k <= kmax; ++k) {
            vals[static_cast<std::size_t>(k - 1)] = tail / out.mu;
            pi_sum += tail / out.mu;
            if (idx < y_pmf.size() && y_pmf[idx].first == k) {
                tail -= y_pmf[idx].second;
                ++idx;
            }
        }
        out.pi_renorm = std::abs(1.0 - pi_sum);
        for (long long k = 1; k <= kmax; ++k)
            out.pi.emplace_back(k, vals[static_cast<std::size_t>(k - 1)] / pi_sum);
    }
    {
        double psi_sum = 0.0;
        for (const auto& [v, p] : y_pmf) psi_sum += static_cast<double>(v) * p / out.mu;
        out.psi_renorm = std::abs(1.0 - psi_sum);
        for (const auto& [v, p] : y_pmf)
            out.psi.emplace_back(v, static_cast<double>(v) * p / out.mu / psi_sum);
    }
    out.renorm_flagged = out.pi_renorm > tail_tolerance || out.psi_renorm > tail_tolerance;
    return out;
}

struct SpitzerResult {
    double raw = 0.0;       // exp of the partial sum of (1/n)(1/2 - P(S_n > 0))
    double corrected = 0.0; // (sigma / sqrt(2)) * raw
    std::vector<double> partials; // partial exponents, 1-indexed by n
    double last_term = 0.0;       // magnitude of the final term, a convergence indicator
};

// Spitzer's series for the mean ladder height, with P(S_n > 0) computed
// exactly by iterated convolution. Finite-variance laws only.
inline SpitzerResult spitzer_mu(const IncrementLaw& law, int n_max,
                                double mass_tolerance = 1e-12,
                                std::size_t support_budget = (std::size_t{1} << 24)) {
    if (!law.finite_variance())
        throw std::invalid_argument("spitzer_mu: law must have finite variance");
    if (n_max < 1) throw std::invalid_argument("spitzer_mu: n_max must be >= 1");
    SpitzerResult out;
    out.partials.reserve(static_cast<std::size_t>(n_max));
    Pmf base = law.one_step_pmf(mass_tolerance, support_budget);
    Pmf cur = base;
    std::vector<std::pair<long long, double>> pairs;
    for (std::size_t i = 0; i < base.p.size(); ++i)
        if (base.p[i] != 0.0)
            pairs.emplace_back(base.min_k + static_cast<long long>(i), base.p[i]);
    double acc = 0.0;
    for (int n = 1; n <= n_max; ++n) {
        if (n > 1) {
            Pmf next;
            const long long span = static_cast<long long>(cur.p.size()) +
                                   (pairs.back().first - pairs.front().first);
            if (span > static_cast<long long>(support_budget))
                throw ResourceError("spitzer_mu: convolution support exceeds budget");
            next.min_k = cur.min_k + pairs.front().first;
            next.p.assign(static_cast<std::size_t>(span), 0.0);
            for (std::size_t i = 0; i < cur.p.size(); ++i) {
                const double ci = cur.p[i];
                if (ci == 0.0) continue;
                for (const auto& [k, pk] : pairs)
                    next.p[i + static_cast<std::size_t>(k - pairs.front().first)] += ci * pk;
            }
            cur = std::move(next);
        }
        const double term = (0.5 - cur.prob_positive()) / static_cast<double>(n);
        acc += term;
        out.partials.push_back(acc);
        out.last_term = std::abs(term);
    }
    out.raw = std::exp(acc);
    out.corrected = std::sqrt(law.variance() / 2.0) * out.raw;
    return out;
}

// Empirical moments of the overshoot Z_y over a grid of levels. Each level's
// estimate pools a geometric window of levels [y, window_factor * y] crossed
// by `paths` independent walks; standard errors come from per-path means, so
// within-path correlation does not understate them. Walks that hit the step
// cap contribute the levels they did cross (crossings already made are exact);
// the censored fraction is reported.
struct OvershootTable {
    struct Row {
        long long y = 0;
        double moment = 0.0;       // E[Z^q] estimate, q = p - 2
        double se = 0.0;           // from per-path means
        std::size_t samples = 0;
        double censored_fraction = 0.0;
        std::map<long long, double> z_pmf; // pooled empirical law of Z over the window
        double mean_z = 0.0;
    };
    double q = 1.0;
    std::vector<Row> rows;
};

inline std::vector<long long> geometric_levels(long long y_lo, double factor, std::size_t count) {
    std::vector<long long> levels;
    levels.reserve(count);
    long long prev = y_lo - 1;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count > 1 ? count - 1 : 1);
        long long v = static_cast<long long>(std::llround(static_cast<double>(y_lo) *
                                                          std::pow(factor, t)));
        if (v <= prev) v = prev + 1;
        levels.push_back(v);
        prev = v;
    }
    return levels;
}

inline OvershootTable overshoot_envelope_check(const IncrementLaw& law, double p,
                                               std::span<const long long> y_grid,
                                               std::size_t paths, RandomStream& rng,
                                               std::uint64_t step_cap = kDefaultStepCap,
                                               double window_factor = 1.1,
                                               std::size_t levels_per_window = 64) {
    if (!(p > 2.0)) throw std::invalid_argument("overshoot_envelope_check: p must exceed 2");
    OvershootTable table;
    table.q = p - 2.0;
    for (long long y : y_grid) {
        const auto levels = geometric_levels(y, window_factor, levels_per_window);
        OvershootTable::Row row;
        row.y = y;
        std::vector<double> path_means;
        std::vector<double> path_mean_z;
        std::size_t censored = 0, total_possible = 0;
        std::map<long long, std::uint64_t> z_counts;
        std::uint64_t z_total = 0;
        for (std::size_t rep = 0; rep < paths; ++rep) {
            auto mp = first_passage_multi(law, 0, levels, rng, step_cap);
            total_possible += levels.size();
            censored += levels.size() - mp.crossed;
            if (mp.crossed == 0) continue;
            double acc = 0.0, accz = 0.0;
            for (std::size_t i = 0; i < mp.crossed; ++i) {
                const auto z = mp.overshoots[i];
                acc += std::pow(static_cast<double>(z), table.q);
                accz += static_cast<double>(z);
                ++z_counts[z];
                ++z_total;
            }
            path_means.push_back(acc / static_cast<double>(mp.crossed));
            path_mean_z.push_back(accz / static_cast<double>(mp.crossed));
        }
        if (path_means.empty())
            throw std::runtime_error("overshoot_envelope_check: no path crossed any level");
        double m = 0.0;
        for (double v : path_means) m += v;
        m /= static_cast<double>(path_means.size());
        double var = 0.0;
        for (double v : path_means) var += (v - m) * (v - m);
        const std::size_t np = path_means.size();
        row.moment = m;
        row.se = np > 1 ? std::sqrt(var / static_cast<double>(np - 1) /
                                    static_cast<double>(np))
                        : 0.0;
        double mz = 0.0;
        for (double v : path_mean_z) mz += v;
        row.mean_z = mz / static_cast<double>(path_mean_z.size());
        row.samples = static_cast<std::size_t>(z_total);
        row.censored_fraction =
            static_cast<double>(censored) / static_cast<double>(total_possible);
        for (const auto& [z, c] : z_counts)
            row.z_pmf[z] = static_cast<double>(c) / static_cast<double>(z_total);
        table.rows.push_back(std::move(row));
    }
    return table;
}

// Aggregated ladder statistics bundle for reporting/CSV export.
struct LadderStatistics {
    IntPmf ladder_heights;
    double mu_empirical = 0.0;
    StationaryDistributions stationary;
    SpitzerResult spitzer; // populated only for finite-variance laws
    bool has_spitzer = false;
};

} // namespace idla
