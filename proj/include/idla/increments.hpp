#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "idla/errors.hpp"
#include "idla/rng.hpp"

namespace idla {

enum class LawKind { SimpleSymmetric, FiniteTable, StableTail };

struct AdmissibilityReport {
    bool admissible = false;
    std::string reason; // empty when admissible
};

namespace detail {

inline double kahan_sum(std::span<const double> xs) {
    double s = 0.0, c = 0.0;
    for (double x : xs) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

// Riemann zeta via Euler-Maclaurin; accurate to ~1e-16 relative for s > 1.5-ish
// and still ~1e-14 near s = 2.1 with n = 4096.
inline double zeta_em(double s) {
    const int n = 4096;
    double sum = 0.0, c = 0.0;
    for (int k = n; k >= 1; --k) {
        double x = std::pow(static_cast<double>(k), -s) - c;
        double t = sum + x;
        c = (t - sum) - x;
        sum = t;
    }
    const double nn = n;
    double tail = std::pow(nn, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(nn, -s) +
                  s * std::pow(nn, -s - 1.0) / 12.0 -
                  s * (s + 1.0) * (s + 2.0) * std::pow(nn, -s - 3.0) / 720.0;
    return sum + tail;
}

// Walker/Vose alias table over an arbitrary finite pmf.
struct AliasTable {
    std::vector<long long> values;
    std::vector<double> threshold;
    std::vector<std::uint32_t> alias;

    void build(const std::vector<long long>& vals, const std::vector<double>& probs) {
        const std::size_t n = vals.size();
        values = vals;
        threshold.assign(n, 0.0);
        alias.assign(n, 0);
        std::vector<double> scaled(n);
        for (std::size_t i = 0; i < n; ++i) scaled[i] = probs[i] * static_cast<double>(n);
        std::vector<std::uint32_t> small, large;
        for (std::size_t i = 0; i < n; ++i)
            (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
        while (!small.empty() && !large.empty()) {
            std::uint32_t s = small.back();
            small.pop_back();
            std::uint32_t l = large.back();
            threshold[s] = scaled[s];
            alias[s] = l;
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            if (scaled[l] < 1.0) {
                large.pop_back();
                small.push_back(l);
            }
        }
        for (std::uint32_t i : large) threshold[i] = 1.0;
        for (std::uint32_t i : small) threshold[i] = 1.0;
    }

    long long draw(RandomStream& rng) const {
        const std::uint64_t n = values.size();
        using u128 = unsigned __int128;
        const auto i =
            static_cast<std::size_t>((static_cast<u128>(rng.next_u64()) * n) >> 64);
        return (rng.next_double() < threshold[i]) ? values[i] : values[alias[i]];
    }
};

// Precomputed state for exact StableTail sampling: alias table over
// |k| <= cutoff plus floor-of-Pareto rejection for the tail. The rejection
// envelope is the continuous Pareto(alpha) density matched at the cutoff;
// its per-proposal acceptance is 1 - O(1/cutoff).
struct StableTables {
    double alpha = 0.0;
    long long cutoff = 0;
    double zeta_one_plus_alpha = 0.0;
    double core_mass = 0.0; // P(|X| <= cutoff)
    double ratio_max = 0.0;
    AliasTable core;

    static double ratio(double m, double a) {
        // m^{-1-a} / (m^{-a} - (m+1)^{-a}); decreasing in m
        const double d = -std::expm1(-a * std::log1p(1.0 / m));
        return 1.0 / (m * d);
    }

    void build(double a, long long n0) {
        alpha = a;
        cutoff = n0;
        zeta_one_plus_alpha = zeta_em(1.0 + a);
        std::vector<long long> vals;
        std::vector<double> probs;
        vals.reserve(2 * static_cast<std::size_t>(n0));
        probs.reserve(2 * static_cast<std::size_t>(n0));
        double s1 = 0.0, c = 0.0;
        for (long long k = n0; k >= 1; --k) {
            const double pk = std::pow(static_cast<double>(k), -1.0 - a);
            double y = pk - c;
            double t = s1 + y;
            c = (t - s1) - y;
            s1 = t;
        }
        core_mass = s1 / zeta_one_plus_alpha;
        const double z = 2.0 * zeta_one_plus_alpha;
        for (long long k = 1; k <= n0; ++k) {
            const double pk = std::pow(static_cast<double>(k), -1.0 - a) / z;
            vals.push_back(k);
            probs.push_back(pk);
            vals.push_back(-k);
            probs.push_back(pk);
        }
        // alias build wants a normalized pmf over the core
        const double inv = 1.0 / (s1 / zeta_one_plus_alpha);
        for (auto& p : probs) p *= inv;
        core.build(vals, probs);
        ratio_max = ratio(static_cast<double>(n0 + 1), a);
    }

    long long draw_tail_magnitude(RandomStream& rng) const {
        const double a = alpha;
        const double n0 = static_cast<double>(cutoff);
        for (;;) {
            const double v = n0 * std::pow(rng.next_open01(), -1.0 / a);
            // Magnitudes beyond 2^62 carry mass < (cutoff/2^62)^alpha < 1e-13^alpha;
            // redrawing there keeps arithmetic in range.
            if (!(v < 4.6e18)) continue;
            const double m = std::floor(v);
            if (m < n0 + 1.0) continue;
            if (rng.next_double() * ratio_max <= ratio(m, a))
                return static_cast<long long>(m);
        }
    }

    long long draw(RandomStream& rng) const {
        if (rng.next_double() < core_mass) return core.draw(rng);
        const long long mag = draw_tail_magnitude(rng);
        return (rng.next_u64() & 1) ? mag : -mag;
    }
};

} // namespace detail

// n-step distribution on a contiguous integer window.
struct Pmf {
    long long min_k = 0;
    std::vector<double> p;
    double total_mass = 1.0;

    double prob(long long k) const {
        const long long i = k - min_k;
        if (i < 0 || i >= static_cast<long long>(p.size())) return 0.0;
        return p[static_cast<std::size_t>(i)];
    }
    double mean() const {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i)
            s += p[i] * static_cast<double>(min_k + static_cast<long long>(i));
        return s;
    }
    double variance() const {
        const double m = mean();
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = static_cast<double>(min_k + static_cast<long long>(i)) - m;
            s += p[i] * d * d;
        }
        return s;
    }
    double prob_positive() const {
        double s = 0.0, c = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (min_k + static_cast<long long>(i) <= 0) continue;
            double y = p[i] - c;
            double t = s + y;
            c = (t - s) - y;
            s = t;
        }
        return s;
    }
    double prob_zero() const { return prob(0); }
};

// Per-walk drawers. Dispatch happens once per walk via IncrementLaw::with_drawer,
// so stepping loops stay free of per-step branching on the law kind.
struct SimpleDrawer {
    RandomStream& rng;
    std::uint64_t buf = 0;
    int left = 0;
    long long next() {
        if (left == 0) {
            buf = rng.next_u64();
            left = 64;
        }
        const long long v = 1 - 2 * static_cast<long long>(buf & 1);
        buf >>= 1;
        --left;
        return v;
    }
};

struct UniformTableDrawer {
    RandomStream& rng;
    const long long* values;
    std::uint64_t mask;
    int bits;
    std::uint64_t buf = 0;
    int left = 0;
    long long next() {
        if (left < bits) {
            buf = rng.next_u64();
            left = 64;
        }
        const long long v = values[buf & mask];
        buf >>= bits;
        left -= bits;
        return v;
    }
};

struct AliasDrawer {
    RandomStream& rng;
    const detail::AliasTable& table;
    long long next() { return table.draw(rng); }
};

struct StableDrawer {
    RandomStream& rng;
    const detail::StableTables& tables;
    long long next() { return tables.draw(rng); }
};

class IncrementLaw {
  public:
    static constexpr long long kDefaultStableCutoff = 1LL << 16;

    static IncrementLaw simple() {
        IncrementLaw law;
        law.kind_ = LawKind::SimpleSymmetric;
        law.support_ = {-1, 1};
        law.probs_ = {0.5, 0.5};
        law.mean_ = 0.0;
        law.variance_ = 1.0;
        return law;
    }

    static IncrementLaw finite_table(std::vector<long long> support, std::vector<double> probs) {
        IncrementLaw law;
        law.kind_ = LawKind::FiniteTable;
        if (support.size() != probs.size() || support.empty())
            throw std::invalid_argument("finite table: support/probs size mismatch or empty");
        std::vector<std::size_t> order(support.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
            if (support[order[i]] == support[order[i + 1]])
                throw std::invalid_argument("finite table: duplicate support point");
        for (double p : probs)
            if (!(p >= 0.0) || !std::isfinite(p))
                throw std::invalid_argument("finite table: negative or non-finite probability");
        law.support_.reserve(support.size());
        law.probs_.reserve(probs.size());
        for (std::size_t i : order) {
            law.support_.push_back(support[i]);
            law.probs_.push_back(probs[i]);
        }
        const double total = detail::kahan_sum(law.probs_);
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("finite table: probabilities sum to " +
                                        std::to_string(total) + ", not 1");
        long double m = 0.0L, v = 0.0L;
        for (std::size_t i = 0; i < law.support_.size(); ++i)
            m += static_cast<long double>(law.probs_[i]) * law.support_[i];
        for (std::size_t i = 0; i < law.support_.size(); ++i) {
            const long double d = static_cast<long double>(law.support_[i]) - m;
            v += static_cast<long double>(law.probs_[i]) * d * d;
        }
        law.mean_ = static_cast<double>(m);
        law.variance_ = static_cast<double>(v);
        law.setup_table_sampler();
        return law;
    }

    static IncrementLaw stable_tail(double alpha, long long table_cutoff = kDefaultStableCutoff) {
        if (!(alpha > 1.0) || !(alpha < 2.0))
            throw std::invalid_argument("stable tail law requires alpha in (1,2)");
        if (table_cutoff < 2)
            throw std::invalid_argument("stable tail law requires table_cutoff >= 2");
        IncrementLaw law;
        law.kind_ = LawKind::StableTail;
        law.alpha_ = alpha;
        law.mean_ = 0.0; // symmetric
        law.variance_ = std::numeric_limits<double>::infinity();
        law.stable_.build(alpha, table_cutoff);
        return law;
    }

    static IncrementLaw from_json(const nlohmann::json& j) {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "simple") return simple();
        if (kind == "table")
            return finite_table(j.at("support").get<std::vector<long long>>(),
                                j.at("probs").get<std::vector<double>>());
        if (kind == "stable") {
            long long cutoff = kDefaultStableCutoff;
            if (j.contains("table_cutoff")) cutoff = j.at("table_cutoff").get<long long>();
            return stable_tail(j.at("alpha").get<double>(), cutoff);
        }
        throw std::invalid_argument("unknown law kind: " + kind);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        switch (kind_) {
            case LawKind::SimpleSymmetric:
                j["kind"] = "simple";
                break;
            case LawKind::FiniteTable:
                j["kind"] = "table";
                j["support"] = support_;
                j["probs"] = probs_;
                break;
            case LawKind::StableTail:
                j["kind"] = "stable";
                j["alpha"] = alpha_;
                j["table_cutoff"] = stable_.cutoff;
                break;
        }
        return j;
    }

    LawKind kind() const { return kind_; }
    double alpha() const { return kind_ == LawKind::StableTail ? alpha_ : 2.0; }
    double mean() const { return mean_; }
    double variance() const { return variance_; }
    bool finite_variance() const { return std::isfinite(variance_); }
    const std::vector<long long>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }
    long long stable_cutoff() const { return stable_.cutoff; }
    double stable_core_mass() const { return stable_.core_mass; }
    double stable_normalizer() const { return 2.0 * stable_.zeta_one_plus_alpha; }

    double pmf(long long k) const {
        switch (kind_) {
            case LawKind::SimpleSymmetric:
                return (k == 1 || k == -1) ? 0.5 : 0.0;
            case LawKind::FiniteTable: {
                auto it = std::lower_bound(support_.begin(), support_.end(), k);
                if (it == support_.end() || *it != k) return 0.0;
                return probs_[static_cast<std::size_t>(it - support_.begin())];
            }
            case LawKind::StableTail:
                if (k == 0) return 0.0;
                return std::pow(std::abs(static_cast<double>(k)), -1.0 - alpha_) /
                       (2.0 * stable_.zeta_one_plus_alpha);
        }
        return 0.0;
    }

    // Irreducibility check: not constant, mean zero, and no h > 1 divides
    // every supported point. Zero-probability support points are ignored.
    AdmissibilityReport check_admissible() const {
        if (kind_ == LawKind::StableTail || kind_ == LawKind::SimpleSymmetric)
            return {true, {}};
        long long g = 0;
        std::size_t supported = 0;
        bool has_nonzero = false;
        for (std::size_t i = 0; i < support_.size(); ++i) {
            if (probs_[i] <= 0.0) continue;
            ++supported;
            if (support_[i] != 0) {
                has_nonzero = true;
                g = std::gcd(g, std::abs(support_[i]));
            }
        }
        if (supported <= 1 || !has_nonzero) return {false, "law is constant"};
        if (std::abs(mean_) > 1e-12)
            return {false, "mean is " + std::to_string(mean_) + ", not zero"};
        if (g > 1) return {false, "support contained in " + std::to_string(g) + "ℤ"};
        return {true, {}};
    }

    template <class F>
    decltype(auto) with_drawer(RandomStream& rng, F&& f) const {
        switch (kind_) {
            case LawKind::SimpleSymmetric: {
                SimpleDrawer d{rng};
                return f(d);
            }
            case LawKind::FiniteTable:
                if (uniform_bits_ > 0) {
                    UniformTableDrawer d{rng, support_.data(),
                                         (1ULL << uniform_bits_) - 1, uniform_bits_};
                    return f(d);
                } else {
                    AliasDrawer d{rng, alias_};
                    return f(d);
                }
            case LawKind::StableTail:
            default: {
                StableDrawer d{rng, stable_};
                return f(d);
            }
        }
    }

    long long sample(RandomStream& rng) const {
        return with_drawer(rng, [](auto& d) { return d.next(); });
    }

    // n-fold convolution. Exact for finite tables; for StableTail the one-step
    // law is first truncated to carry mass >= 1 - mass_tolerance.
    Pmf exact_pmf(int n, double mass_tolerance = 1e-12,
                  std::size_t support_budget = (std::size_t{1} << 24)) const {
        if (n < 1) throw std::invalid_argument("exact_pmf requires n >= 1");
        Pmf base = one_step_pmf(mass_tolerance, support_budget);
        Pmf cur = base;
        const auto pairs = nonzero_pairs(base);
        for (int step = 2; step <= n; ++step) {
            cur = convolve(cur, pairs, base.min_k, support_budget);
        }
        return cur;
    }

    Pmf one_step_pmf(double mass_tolerance, std::size_t support_budget) const {
        Pmf out;
        switch (kind_) {
            case LawKind::SimpleSymmetric:
                out.min_k = -1;
                out.p = {0.5, 0.0, 0.5};
                return out;
            case LawKind::FiniteTable: {
                out.min_k = support_.front();
                out.p.assign(static_cast<std::size_t>(support_.back() - support_.front() + 1), 0.0);
                for (std::size_t i = 0; i < support_.size(); ++i)
                    out.p[static_cast<std::size_t>(support_[i] - out.min_k)] = probs_[i];
                return out;
            }
            case LawKind::StableTail:
            default: {
                // choose K with 2 sum_{k>K} p(k) <= mass_tolerance
                const double a = alpha_;
                const double z = 2.0 * stable_.zeta_one_plus_alpha;
                const double want = mass_tolerance * z * a / 2.0;
                const double Kd = std::pow(want, -1.0 / a);
                if (!(Kd < static_cast<double>(support_budget) / 2.0))
                    throw ResourceError("stable one-step pmf support (" + std::to_string(Kd) +
                                        " half-width) exceeds budget");
                const long long K = std::max<long long>(1, static_cast<long long>(std::ceil(Kd)));
                out.min_k = -K;
                out.p.assign(static_cast<std::size_t>(2 * K + 1), 0.0);
                double mass = 0.0;
                for (long long k = 1; k <= K; ++k) {
                    const double pk = std::pow(static_cast<double>(k), -1.0 - a) / z;
                    out.p[static_cast<std::size_t>(K + k)] = pk;
                    out.p[static_cast<std::size_t>(K - k)] = pk;
                    mass += 2.0 * pk;
                }
                out.total_mass = mass;
                return out;
            }
        }
    }

    // Normalized characteristic-function deficit |t|^{-alpha} (1 - Re phi(t)),
    // with alpha = 2 for finite-variance laws. For StableTail this should
    // plateau as t -> 0; the plateau level is the measured beta.
    std::vector<std::pair<double, double>> char_fn_diagnostic(std::span<const double> t_grid) const {
        std::vector<std::pair<double, double>> out;
        out.reserve(t_grid.size());
        for (double t : t_grid) {
            if (!(t > 0.0) || t > 3.14159265358979323846 + 1e-12)
                throw std::invalid_argument("char_fn_diagnostic requires t in (0, pi]");
            out.emplace_back(t, char_deficit(t) / std::pow(t, alpha()));
        }
        return out;
    }

    // 1 - Re phi(t)
    double char_deficit(double t) const {
        switch (kind_) {
            case LawKind::SimpleSymmetric:
                return 1.0 - std::cos(t);
            case LawKind::FiniteTable: {
                double s = 0.0;
                for (std::size_t i = 0; i < support_.size(); ++i)
                    s += probs_[i] * (1.0 - std::cos(t * static_cast<double>(support_[i])));
                return s;
            }
            case LawKind::StableTail:
            default:
                return stable_char_deficit(t);
        }
    }

  private:
    IncrementLaw() = default;

    void setup_table_sampler() {
        // equal-probability power-of-two supports draw straight from bits
        const std::size_t n = support_.size();
        const bool pow2 = n >= 2 && (n & (n - 1)) == 0 && n <= 64;
        bool uniform = true;
        for (double p : probs_)
            if (std::abs(p - 1.0 / static_cast<double>(n)) > 1e-15) uniform = false;
        if (pow2 && uniform) {
            uniform_bits_ = 0;
            for (std::size_t m = n; m > 1; m >>= 1) ++uniform_bits_;
        } else {
            uniform_bits_ = 0;
            alias_.build(support_, probs_);
        }
    }

    static std::vector<std::pair<long long, double>> nonzero_pairs(const Pmf& pmf) {
        std::vector<std::pair<long long, double>> pairs;
        for (std::size_t i = 0; i < pmf.p.size(); ++i)
            if (pmf.p[i] != 0.0)
                pairs.emplace_back(pmf.min_k + static_cast<long long>(i), pmf.p[i]);
        return pairs;
    }

    static Pmf convolve(const Pmf& cur, const std::vector<std::pair<long long, double>>& base,
                        long long base_min, std::size_t support_budget) {
        Pmf out;
        const long long span =
            static_cast<long long>(cur.p.size()) + (base.back().first - base.front().first);
        if (span > static_cast<long long>(support_budget))
            throw ResourceError("convolution support exceeds budget");
        out.min_k = cur.min_k + base.front().first;
        out.p.assign(static_cast<std::size_t>(span), 0.0);
        const long long shift = base.front().first;
        for (std::size_t i = 0; i < cur.p.size(); ++i) {
            const double ci = cur.p[i];
            if (ci == 0.0) continue;
            for (const auto& [k, pk] : base)
                out.p[i + static_cast<std::size_t>(k - shift)] += ci * pk;
        }
        out.total_mass = detail::kahan_sum(std::span<const double>(out.p));
        (void)base_min;
        return out;
    }

    // sum over k of p(k)(1 - cos tk) for the stable law: direct Kahan sum to
    // K ~ 400/t, then Euler-Maclaurin completion with the oscillatory integral
    // evaluated by integration by parts (error << 1e-10 relative to the value).
    // The integration-by-parts tail needs tK >> 1, so the summation length
    // grows like 1/t; below the budget floor the evaluation is refused.
    double stable_char_deficit(double t) const {
        const double a = alpha_;
        if (!(t >= 1e-5))
            throw NumericError("stable characteristic series: t = " + std::to_string(t) +
                                   " below the summation budget floor 1e-5",
                               t);
        const long long K =
            std::max<long long>(1000, static_cast<long long>(std::ceil(400.0 / t)));
        double s = 0.0, c = 0.0;
        for (long long k = 1; k <= K; ++k) {
            const double term =
                std::pow(static_cast<double>(k), -1.0 - a) * (1.0 - std::cos(t * k));
            const double y = term - c;
            const double tt = s + y;
            c = (tt - s) - y;
            s = tt;
        }
        const double Kd = static_cast<double>(K);
        // integral of x^{-1-a} over (K, inf) minus the oscillatory part
        const double plain = std::pow(Kd, -a) / a;
        const double osc = osc_integral(1.0 + a, Kd, t);
        const double fK = std::pow(Kd, -1.0 - a) * (1.0 - std::cos(t * Kd));
        const double fpK = -(1.0 + a) * std::pow(Kd, -2.0 - a) * (1.0 - std::cos(t * Kd)) +
                           std::pow(Kd, -1.0 - a) * t * std::sin(t * Kd);
        const double tail = plain - osc - 0.5 * fK - fpK / 12.0;
        const double total = s + tail;
        return total / stable_.zeta_one_plus_alpha; // = (2/Z) * sum
    }

    // int_K^inf x^{-s} cos(t x) dx via repeated integration by parts,
    // valid for tK >> 1 (callers use tK >= 400).
    static double osc_integral(double s, double K, double t) {
        // I(s) = -K^{-s} sin(tK)/t + (s/t) J(s+1)
        // J(s) =  K^{-s} cos(tK)/t - (s/t) I(s+1)
        constexpr int depth = 8;
        double I = 0.0, J = 0.0; // values at the deepest level, taken as 0
        for (int d = depth; d >= 0; --d) {
            const double sd = s + d;
            const double Jn = std::pow(K, -sd) * std::cos(t * K) / t - (sd / t) * I;
            const double In = -std::pow(K, -sd) * std::sin(t * K) / t + (sd / t) * J;
            I = In;
            J = Jn;
        }
        return I;
    }

    LawKind kind_ = LawKind::SimpleSymmetric;
    std::vector<long long> support_;
    std::vector<double> probs_;
    double alpha_ = 2.0;
    double mean_ = 0.0;
    double variance_ = 0.0;
    int uniform_bits_ = 0;
    detail::AliasTable alias_;
    detail::StableTables stable_;
};

} // namespace idla
