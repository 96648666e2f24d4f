#pragma once

#include <cassert>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "idla/increments.hpp"
#include "idla/rng.hpp"
#include "idla/walker.hpp"

namespace idla {

// Occupied-site set: a fixed bitmap window around the origin backed by a hash
// set for far-flung sites. Heavy-tailed clusters scatter sites at unbounded
// distances, so an interval list would degrade; membership tests during walks
// hit the bitmap almost always.
class SiteSet {
  public:
    explicit SiteSet(long long window_halfspan = 1LL << 22)
        : half_(window_halfspan), bits_((2 * window_halfspan + 64) / 64 + 1, 0) {}

    bool contains(long long s) const {
        if (s >= -half_ && s <= half_) {
            const std::uint64_t i = static_cast<std::uint64_t>(s + half_);
            return (bits_[i >> 6] >> (i & 63)) & 1;
        }
        return far_.count(s) != 0;
    }

    // true if newly inserted
    bool insert(long long s) {
        if (s >= -half_ && s <= half_) {
            const std::uint64_t i = static_cast<std::uint64_t>(s + half_);
            const std::uint64_t mask = 1ULL << (i & 63);
            if (bits_[i >> 6] & mask) return false;
            bits_[i >> 6] |= mask;
            ++count_;
            return true;
        }
        const bool fresh = far_.insert(s).second;
        if (fresh) ++count_;
        return fresh;
    }

    std::size_t size() const { return count_; }

    // number of occupied sites with |site| > bound
    long long count_abs_greater(double bound) const {
        long long n = 0;
        for (long long site : far_)
            if (std::abs(static_cast<double>(site)) > bound) ++n;
        const long long b = static_cast<long long>(std::floor(bound));
        for (long long site = b + 1; site <= half_; ++site)
            if (contains(site)) ++n;
        for (long long site = -half_; site <= -b - 1; ++site)
            if (contains(site)) ++n;
        return n;
    }

    template <class F>
    void for_each(F&& f) const {
        for (long long site = -half_; site <= half_; ++site)
            if (contains(site)) f(site);
        for (long long site : far_) f(site);
    }

  private:
    long long half_;
    std::vector<std::uint64_t> bits_;
    std::unordered_set<long long> far_;
    std::size_t count_ = 0;
};

struct RunCheckpoint {
    long long m = 0;
    long long r = 0;
};

struct RunResult {
    std::uint64_t seed = 0;
    nlohmann::json law;
    long long m_total = 0;
    std::vector<RunCheckpoint> checkpoints;
    std::vector<std::pair<long long, std::uint64_t>> coverage; // (x, sigma_x)
    double wall_time_ms = 0.0;
    bool interval_at_every_dispatch = true;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["law"] = law;
        j["m_total"] = m_total;
        auto cps = nlohmann::json::array();
        for (const auto& c : checkpoints) cps.push_back({c.m, c.r});
        j["checkpoints"] = cps;
        auto cov = nlohmann::json::array();
        for (const auto& [x, sx] : coverage) cov.push_back({x, sx});
        j["coverage"] = cov;
        j["wall_time"] = wall_time_ms;
        return j;
    }

    void write_checkpoints_csv(std::ostream& os) const {
        os << "m,r_m\n";
        for (const auto& c : checkpoints) os << c.m << ',' << c.r << '\n';
    }
    void write_coverage_csv(std::ostream& os) const {
        os << "x,sigma_x\n";
        for (const auto& [x, sx] : coverage) os << x << ',' << sx << '\n';
    }
};

// The aggregate. Walkers are dispatched from the origin; each one settles on
// the first site it visits outside the current cluster. Strictly sequential in
// m; parallelism belongs at the replica level.
class Cluster {
  public:
    explicit Cluster(long long window_halfspan = 1LL << 22) : sites_(window_halfspan) {
        sites_.insert(0);
        sigma_.push_back(0); // sigma_0 = 0: radius 0 is covered by the germ
    }

    long long walkers() const { return m_; }
    long long inner_radius() const { return r_; }
    std::size_t occupied_count() const { return sites_.size(); }
    bool contains(long long s) const { return sites_.contains(s); }
    long long min_site() const { return min_site_; }
    long long max_site() const { return max_site_; }
    bool is_interval() const {
        return max_site_ - min_site_ + 1 == static_cast<long long>(sites_.size());
    }
    const SiteSet& sites() const { return sites_; }

    // sigma_x for every covered radius x <= inner_radius
    const std::vector<std::uint64_t>& coverage_log() const { return sigma_; }
    std::uint64_t sigma(long long x) const {
        if (x < 0 || x > r_) throw std::out_of_range("sigma: radius not covered yet");
        return sigma_[static_cast<std::size_t>(x)];
    }

    long long dispatch_one(const IncrementLaw& law, RandomStream& rng,
                           std::uint64_t step_cap = kDefaultStepCap) {
        return law.with_drawer(rng, [&](auto& d) { return dispatch_core(d, step_cap); });
    }

    // |occupied \ [-Ax, Ax]|
    long long lost_particles(long long x, double A) const {
        return sites_.count_abs_greater(A * static_cast<double>(x));
    }

    // O(1) structural checks; the maximality check is valid because the
    // radius is advanced eagerly and sites are never removed.
    void check_invariants() const {
        if (!sites_.contains(0)) throw std::logic_error("cluster invariant: 0 not occupied");
        if (static_cast<long long>(sites_.size()) != m_ + 1)
            throw std::logic_error("cluster invariant: |occupied| != m+1");
        if (2 * r_ > m_) throw std::logic_error("cluster invariant: r_m > m/2");
        if (sites_.contains(r_ + 1) && sites_.contains(-(r_ + 1)))
            throw std::logic_error("cluster invariant: inner radius not maximal");
        if (static_cast<long long>(sigma_.size()) != r_ + 1)
            throw std::logic_error("cluster invariant: coverage log out of step");
    }

    // Exhaustive O(r) variant used by tests.
    void check_invariants_full() const {
        check_invariants();
        for (long long x = 0; x <= r_; ++x)
            if (!sites_.contains(x) || !sites_.contains(-x))
                throw std::logic_error("cluster invariant: hole inside [-r, r]");
        for (long long x = 1; x <= r_; ++x)
            if (sigma_[static_cast<std::size_t>(x)] < sigma_[static_cast<std::size_t>(x - 1)])
                throw std::logic_error("cluster invariant: sigma not monotone");
    }

    template <class Drawer>
    long long dispatch_core(Drawer& d, std::uint64_t step_cap) {
        long long s = 0;
        std::uint64_t n = 0;
        const long long r_core = r_; // fixed for the whole walk
        for (;;) {
            if (n >= step_cap) throw CapExceeded(s, n);
            s += d.next();
            ++n;
            const long long as = s < 0 ? -s : s;
            if (as <= r_core) continue;
            if (!sites_.contains(s)) break;
        }
        settle(s);
        steps_last_dispatch_ = n;
#ifndef NDEBUG
        check_invariants();
#else
        if ((m_ & 1023) == 0) check_invariants();
#endif
        return s;
    }

    std::uint64_t steps_last_dispatch() const { return steps_last_dispatch_; }

    // Record a settlement computed by an external replay of the walk (used by
    // diagnostics, which extend walks past their settling step).
    void settle_external(long long s) {
        if (sites_.contains(s)) throw std::logic_error("settle_external: site already occupied");
        settle(s);
#ifndef NDEBUG
        check_invariants();
#endif
    }

  private:
    void settle(long long s) {
        sites_.insert(s);
        ++m_;
        if (s < min_site_) min_site_ = s;
        if (s > max_site_) max_site_ = s;
        while (sites_.contains(r_ + 1) && sites_.contains(-(r_ + 1))) {
            ++r_;
            sigma_.push_back(static_cast<std::uint64_t>(m_));
        }
    }

    SiteSet sites_;
    long long m_ = 0;
    long long r_ = 0;
    long long min_site_ = 0;
    long long max_site_ = 0;
    std::vector<std::uint64_t> sigma_;
    std::uint64_t steps_last_dispatch_ = 0;
};

struct RunLimits {
    std::uint64_t per_walk_step_cap = kDefaultStepCap;
    std::uint64_t global_step_budget = 1'000'000'000'000ULL;
};

// Grow a fresh cluster by m_total walkers. Walker j's randomness is the
// derived stream child(run_seed, j), which is what lets diagnostics replay
// and extend individual walks later.
inline RunResult run_cluster(Cluster& cluster, const IncrementLaw& law, long long m_total,
                             std::uint64_t run_seed, std::span<const long long> checkpoints,
                             const RunLimits& limits = {}) {
    if (m_total < 1) throw std::invalid_argument("run_cluster: m_total must be >= 1");
    RunResult res;
    res.seed = run_seed;
    res.law = law.to_json();
    res.m_total = m_total;
    std::uint64_t total_steps = 0;
    std::size_t ci = 0;
    for (long long j = cluster.walkers() + 1; j <= m_total; ++j) {
        RandomStream rng = RandomStream::child(run_seed, static_cast<std::uint64_t>(j));
        cluster.dispatch_one(law, rng, limits.per_walk_step_cap);
        total_steps += cluster.steps_last_dispatch();
        if (total_steps > limits.global_step_budget)
            throw CapExceeded(0, total_steps);
        res.interval_at_every_dispatch =
            res.interval_at_every_dispatch && cluster.is_interval();
        while (ci < checkpoints.size() && checkpoints[ci] == j) {
            res.checkpoints.push_back({j, cluster.inner_radius()});
            ++ci;
        }
    }
    const auto& log = cluster.coverage_log();
    res.coverage.reserve(log.size());
    for (std::size_t x = 0; x < log.size(); ++x)
        res.coverage.emplace_back(static_cast<long long>(x), log[x]);
    return res;
}

// Dispatch until the inner radius reaches x_target; used for coverage-time
// experiments. Returns sigma_{x_target} (the walker count when reached).
inline long long run_until_radius(Cluster& cluster, const IncrementLaw& law, long long x_target,
                                  std::uint64_t run_seed, const RunLimits& limits = {},
                                  long long walker_cap = 100'000'000) {
    std::uint64_t total_steps = 0;
    while (cluster.inner_radius() < x_target) {
        const long long j = cluster.walkers() + 1;
        if (j > walker_cap) throw CapExceeded(0, total_steps);
        RandomStream rng = RandomStream::child(run_seed, static_cast<std::uint64_t>(j));
        cluster.dispatch_one(law, rng, limits.per_walk_step_cap);
        total_steps += cluster.steps_last_dispatch();
        if (total_steps > limits.global_step_budget) throw CapExceeded(0, total_steps);
    }
    return cluster.walkers();
}

} // namespace idla
