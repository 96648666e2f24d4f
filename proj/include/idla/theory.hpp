#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <shared_mutex>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "idla/errors.hpp"

namespace idla::theory {

inline constexpr double kDefaultQuadTol = 1e-10;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

namespace detail {

template <class F>
double integrate(F&& f, double a, double b, double tol, const char* what) {
    if (a == b) return 0.0;
    double err = 0.0, l1 = 0.0;
    // Rescale to [0,1]: the adaptive termination criterion conditions badly on
    // very short intervals otherwise.
    const double scale = b - a;
    auto g = [&](double t) { return scale * f(a + t * scale); };
    const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        g, 0.0, 1.0, 25, tol, &err, &l1);
    // err is an absolute error estimate; tol is relative
    if (!(err <= 1e3 * tol * std::max(1.0, std::abs(v))) || !std::isfinite(v))
        throw NumericError(std::string(what) + ": quadrature did not converge", err);
    return v;
}

inline double gamma_ratio(double alpha) {
    // Gamma(alpha) / Gamma(alpha/2)^2
    return std::exp(std::lgamma(alpha) - 2.0 * std::lgamma(alpha / 2.0));
}

// int_a^b u^{alpha/2-1} (1-u)^{alpha/2-1} du over [a,b] within [0,1], with the
// endpoint singularities (exponent alpha/2-1 in (-1/2, 0)) removed by the
// substitutions u = w^{2/alpha} near 0 and u = 1 - w^{2/alpha} near 1.
inline double symmetric_beta_piece(double alpha, double a, double b, double tol) {
    if (!(a <= b)) throw std::invalid_argument("beta piece: a > b");
    const double h = alpha / 2.0;
    double total = 0.0;
    const double mid = 0.5;
    if (a < mid) {
        const double hi = std::min(b, mid);
        auto g = [&](double w) {
            const double u = std::pow(w, 2.0 / alpha);
            return (2.0 / alpha) * std::pow(1.0 - u, h - 1.0);
        };
        total += integrate(g, std::pow(a, h), std::pow(hi, h), tol, "beta[0,1/2]");
    }
    if (b > mid) {
        const double lo = std::max(a, mid);
        auto g = [&](double w) {
            const double u = 1.0 - std::pow(w, 2.0 / alpha);
            return (2.0 / alpha) * std::pow(u, h - 1.0);
        };
        total += integrate(g, std::pow(1.0 - b, h), std::pow(1.0 - lo, h), tol, "beta[1/2,1]");
    }
    return total;
}

} // namespace detail

inline double as_probability(double v, double tol) {
    if (v < -tol || v > 1.0 + tol)
        throw NumericError("value " + std::to_string(v) + " is not a probability within " +
                               std::to_string(tol),
                           v);
    return std::clamp(v, 0.0, 1.0);
}

// Hitting-before-exit limit, finite-variance case: 1 - y, independent of c.
inline double q2(double y, double c) {
    if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("q2: y must lie in [0,1]");
    if (!(c > 0.0)) throw std::invalid_argument("q2: c must be positive");
    return 1.0 - y;
}

// Hitting-before-exit limit, stable case. The (1-v)^{alpha/2-1} endpoint
// singularity is removed by v = 1 - w^{2/alpha}; for small y the boundary
// layer of (y + cv)^{-alpha} near v = y is handled on a log grid (v = y e^u),
// whose y^{1-alpha} factor cancels the y^{alpha-1} prefactor exactly.
inline double q_alpha(double alpha, double y, double c, double tol = kDefaultQuadTol) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("q_alpha: alpha in (1,2)");
    if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("q_alpha: y must lie in [0,1]");
    if (!(c > 0.0)) throw std::invalid_argument("q_alpha: c must be positive");
    if (y == 0.0) return 1.0; // continuous limit at y -> 0
    if (y == 1.0) return 0.0; // empty integration range
    const double pref_no_y = (alpha - 1.0) * std::pow(c, 1.0 - alpha / 2.0) *
                             std::pow(1.0 + c, alpha - 1.0) * std::pow(y + c, alpha / 2.0);
    const double v_mid = std::max(y, 0.5);
    double total = 0.0;
    if (y < v_mid) {
        auto ga = [&](double u) {
            const double eu = std::exp(u);
            return std::pow(1.0 + c * eu, -alpha) * std::pow(1.0 - y * eu, alpha / 2.0 - 1.0) *
                   eu;
        };
        total += pref_no_y * detail::integrate(ga, 0.0, std::log(v_mid / y), tol, "q_alpha[y,mid]");
    }
    {
        auto gb = [&](double w) {
            const double v = 1.0 - std::pow(w, 2.0 / alpha);
            return (2.0 / alpha) * std::pow(y + c * v, -alpha);
        };
        const double piece =
            detail::integrate(gb, 0.0, std::pow(1.0 - v_mid, alpha / 2.0), tol, "q_alpha[mid,1]");
        total += pref_no_y * std::pow(y, alpha - 1.0) * piece;
    }
    return as_probability(total, 1e3 * tol);
}

// Closed-form minorant of q_alpha obtained by dropping (1-v)^{alpha/2-1}.
inline double u_alpha_yc(double alpha, double y, double c) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("u_alpha_yc: alpha in (1,2)");
    if (!(y >= 0.0 && y <= 1.0)) throw std::invalid_argument("u_alpha_yc: y must lie in [0,1]");
    if (!(c > 0.0)) throw std::invalid_argument("u_alpha_yc: c must be positive");
    if (y == 0.0) return 1.0;
    const double ratio = (1.0 + c) / (1.0 + c / y);
    return std::pow((c + y) / c, alpha / 2.0) * (1.0 - std::pow(ratio, alpha - 1.0));
}

// Explicit lower bound (alpha-1) c^{1-alpha/2} (c+y)^{alpha/2-1} (1-y).
inline double q_alpha_lower_bound(double alpha, double y, double c) {
    return (alpha - 1.0) * std::pow(c, 1.0 - alpha / 2.0) *
           std::pow(c + y, alpha / 2.0 - 1.0) * (1.0 - y);
}

// Probability of exiting [-cN, N] on the right, as N -> infinity.
inline double gambler_limit(double alpha, double c, double tol = kDefaultQuadTol) {
    if (!(alpha > 1.0 && alpha <= 2.0)) throw std::invalid_argument("gambler_limit: alpha in (1,2]");
    if (!(c >= 0.0)) throw std::invalid_argument("gambler_limit: c must be >= 0");
    if (alpha == 2.0) return c / (1.0 + c);
    if (c == 0.0) return 0.0;
    const double a = 1.0 / (1.0 + c);
    const double piece = detail::symmetric_beta_piece(alpha, a, 1.0, tol);
    return as_probability(detail::gamma_ratio(alpha) * piece, 1e3 * tol);
}

// The full symmetric beta integral, by quadrature; equals
// Gamma(alpha/2)^2 / Gamma(alpha) (the self-test for the gamma evaluation).
inline double symmetric_beta_integral(double alpha, double tol = kDefaultQuadTol) {
    return detail::symmetric_beta_piece(alpha, 0.0, 1.0, tol);
}

// Dynkin-Lamperti density of the rescaled overshoot Z_y / y.
inline double dynkin_lamperti_density(double alpha, double v) {
    if (!(alpha > 0.0 && alpha < 2.0))
        throw std::invalid_argument("dynkin_lamperti_density: alpha in (0,2)");
    if (!(v > 0.0)) throw std::invalid_argument("dynkin_lamperti_density: v must be > 0");
    return std::sin(kPi * alpha / 2.0) / kPi * std::pow(v, -alpha / 2.0) / (1.0 + v);
}

// P(Z_y / y > u) in the limit: int_u^inf f_alpha. The v->0 singularity is
// tamed by v = w^{1/(1-alpha/2)} and the tail by v = 1/z, z = w^{2/alpha}.
inline double dynkin_lamperti_tail(double alpha, double u, double tol = kDefaultQuadTol) {
    if (!(alpha > 0.0 && alpha < 2.0))
        throw std::invalid_argument("dynkin_lamperti_tail: alpha in (0,2)");
    if (!(u >= 0.0)) throw std::invalid_argument("dynkin_lamperti_tail: u must be >= 0");
    const double q = 1.0 - alpha / 2.0;
    double total = 0.0;
    if (u < 1.0) {
        auto g = [&](double w) {
            const double v = std::pow(w, 1.0 / q);
            return (1.0 / q) / (1.0 + v);
        };
        total += detail::integrate(g, std::pow(u, q), 1.0, tol, "dl_tail[u,1]");
    }
    {
        const double lo = std::max(u, 1.0);
        auto g = [&](double w) {
            const double z = std::pow(w, 2.0 / alpha);
            return (2.0 / alpha) / (1.0 + z);
        };
        total += detail::integrate(g, 0.0, std::pow(1.0 / lo, alpha / 2.0), tol, "dl_tail[1,inf)");
    }
    return as_probability(std::sin(kPi * alpha / 2.0) / kPi * total, 1e3 * tol);
}

// Limit of P(|S at exit of [-x,x]| > (w+1) x): the interval-exit overshoot
// tail. Singularity at v->0 removed by v = xi^{1/(1-alpha/2)}; the tail decay
// v^{-1-alpha} by v = 1/z, z = xi^{1/alpha}.
inline double s_alpha_overshoot(double alpha, double w, double tol = kDefaultQuadTol) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument("s_alpha_overshoot: alpha in (1,2)");
    if (!(w >= 0.0)) throw std::invalid_argument("s_alpha_overshoot: w must be >= 0");
    const double q = 1.0 - alpha / 2.0;
    double total = 0.0;
    if (w < 1.0) {
        auto g = [&](double xi) {
            const double v = std::pow(xi, 1.0 / q);
            return (1.0 / q) * std::pow(2.0 + v, -alpha / 2.0) / (1.0 + v);
        };
        total += detail::integrate(g, std::pow(w, q), 1.0, tol, "s_alpha[w,1]");
    }
    {
        const double lo = std::max(w, 1.0);
        auto g = [&](double xi) {
            const double z = std::pow(xi, 1.0 / alpha);
            return (1.0 / alpha) * std::pow(2.0 * z + 1.0, -alpha / 2.0) / (1.0 + z);
        };
        total += detail::integrate(g, 0.0, std::pow(1.0 / lo, alpha), tol, "s_alpha[1,inf)");
    }
    return as_probability(2.0 * std::sin(kPi * alpha / 2.0) / kPi * total, 1e3 * tol);
}

// u_alpha(w) (the lost-particle generation rate floor), w > 1.
inline double u_alpha_w(double alpha, double w, double tol = kDefaultQuadTol) {
    if (!(w > 1.0)) throw std::invalid_argument("u_alpha_w: w must be > 1");
    return (alpha - 1.0) * std::pow(2.0, alpha / 2.0 - 2.0) *
           s_alpha_overshoot(alpha, w - 1.0, tol);
}

// underline-q(u, s) for 1 < u < s.
inline double q_lower_envelope(double alpha, double u, double s) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument("q_lower_envelope: alpha in (1,2)");
    if (!(u > 1.0 && s > u)) throw std::invalid_argument("q_lower_envelope: need 1 < u < s");
    return (alpha - 1.0) / (1.0 + u) * std::pow((s - u) / s, 1.0 - alpha / 2.0);
}

struct QUpperBound {
    double bound = 1.0;
    bool dominates = true;   // bound >= q_alpha on the checked y-grid
    double max_gap = 0.0;    // max over grid of q_alpha(y) - bound (<= 0 when dominating)
};

// sup_{delta <= y <= 1} q_alpha(y; c) < 1 via the explicit gambler's-ruin
// comparison: 1 - Gamma(alpha)/Gamma(alpha/2)^2 int_{1-delta}^1 ... The
// returned struct also records a grid domination check.
inline QUpperBound q_upper_strict(double alpha, double delta, double c,
                                  double tol = kDefaultQuadTol, int grid_points = 9) {
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("q_upper_strict: delta in (0,1]");
    QUpperBound out;
    const double piece = detail::symmetric_beta_piece(alpha, 1.0 - delta, 1.0, tol);
    out.bound = as_probability(1.0 - detail::gamma_ratio(alpha) * piece, 1e3 * tol);
    for (int i = 0; i < grid_points; ++i) {
        const double y = delta + (1.0 - delta) * static_cast<double>(i) /
                                     static_cast<double>(grid_points - 1);
        const double q = q_alpha(alpha, std::min(y, 1.0), c, tol);
        out.max_gap = std::max(out.max_gap, q - out.bound);
    }
    out.dominates = out.max_gap <= 1e3 * tol;
    return out;
}

struct GrowthConstants {
    double c_alpha = 0.0;        // lower growth rate (closed form)
    double C_prime = 0.0;        // coverage-time upper constant, = 1/c_alpha
    double C_double_prime = 0.0; // coverage-time lower constant, > 2
    double c_prime = 0.0;        // upper growth rate, = 1/C_double_prime
};

inline double c_alpha_formula(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument("c_alpha_formula: alpha in (1,2)");
    return (alpha - 1.0) * std::pow(2.0 - alpha, 2.0 - alpha) /
           ((4.0 - alpha) * std::pow(3.0 - alpha, 3.0));
}

inline double C_alpha_prime_formula(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0))
        throw std::invalid_argument("C_alpha_prime_formula: alpha in (1,2)");
    return (4.0 - alpha) * std::pow(3.0 - alpha, 3.0) * std::pow(2.0 - alpha, alpha - 2.0) /
           (alpha - 1.0);
}

// C'' = 2 + sup{ min(C-2, u_alpha(1.5 (C-1))) / (C+1) : C > C' }. Unimodality
// is not assumed: a coarse log-spaced scan brackets the best point, then
// golden-section refines to 1e-8.
inline GrowthConstants growth_constants(double alpha, double tol = kDefaultQuadTol) {
    GrowthConstants g;
    g.c_alpha = c_alpha_formula(alpha);
    g.C_prime = C_alpha_prime_formula(alpha);

    auto objective = [&](double C) {
        const double ua = u_alpha_w(alpha, 1.5 * (C - 1.0), tol);
        return std::min(C - 2.0, ua) / (C + 1.0);
    };

    const double lo = g.C_prime + 1e-6;
    const double hi = 1000.0;
    constexpr int kScan = 200;
    double best_val = -1.0;
    int best_i = 0;
    std::vector<double> grid(kScan);
    for (int i = 0; i < kScan; ++i) {
        grid[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (kScan - 1));
        const double v = objective(grid[i]);
        if (v > best_val) {
            best_val = v;
            best_i = i;
        }
    }
    double a = grid[std::max(0, best_i - 1)];
    double b = grid[std::min(kScan - 1, best_i + 1)];
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    while (b - a > 1e-8) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = objective(x1);
        }
    }
    const double sup = std::max({best_val, f1, f2});
    if (!(sup > 0.0)) throw NumericError("growth_constants: optimizer failed to bracket", sup);
    g.C_double_prime = 2.0 + sup;
    g.c_prime = 1.0 / g.C_double_prime;
    return g;
}

// Memoizing evaluation context; concurrent reads share the lock, writes are
// exclusive.
class TheoryValues {
  public:
    explicit TheoryValues(double alpha, double quadrature_tolerance = kDefaultQuadTol)
        : alpha_(alpha), tol_(quadrature_tolerance) {}

    double alpha() const { return alpha_; }
    double quadrature_tolerance() const { return tol_; }

    double q(double y, double c) const {
        if (alpha_ == 2.0) return q2(y, c);
        return memoized("q", y, c, [&] { return q_alpha(alpha_, y, c, tol_); });
    }
    double gambler(double c) const {
        return memoized("g", c, 0.0, [&] { return gambler_limit(alpha_, c, tol_); });
    }
    double overshoot_tail(double u) const {
        return memoized("dl", u, 0.0, [&] { return dynkin_lamperti_tail(alpha_, u, tol_); });
    }
    GrowthConstants growth() const { return growth_constants(alpha_, tol_); }

  private:
    template <class F>
    double memoized(const char* fn, double a, double b, F&& compute) const {
        std::ostringstream key;
        key.precision(17);
        key << fn << '(' << a << ',' << b << ')';
        {
            std::shared_lock lock(mu_);
            auto it = memo_.find(key.str());
            if (it != memo_.end()) return it->second;
        }
        const double v = compute();
        std::unique_lock lock(mu_);
        memo_.emplace(key.str(), v);
        return v;
    }

    double alpha_;
    double tol_;
    mutable std::shared_mutex mu_;
    mutable std::map<std::string, double> memo_;
};

} // namespace idla::theory
