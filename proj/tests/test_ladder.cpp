#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idla/ladder.hpp"
#include "idla/walker.hpp"

using namespace idla;

namespace {
IncrementLaw twostep() {
    return IncrementLaw::finite_table({-2, -1, 1, 2}, {0.25, 0.25, 0.25, 0.25});
}
// exact mean ladder height of the +-1/+-2 law; the convolution route
// (40000 terms plus a local-CLT tail) agrees with (5 - sqrt 5)/2 to 3e-9
const double kMuTwostep = (5.0 - std::sqrt(5.0)) / 2.0;

// frozen offline values for the SSRW Spitzer series
constexpr double kRaw400 = 1.38632383173389559;   // exp of the 400-term partial sum
constexpr double kCorr400 = 0.98027898233955584;
constexpr double kRaw4000 = 1.40532231014671710;
constexpr double kCorr4000 = 0.99371293525748816;
// and for the two-step law at n_max = 4000
constexpr double kTwostepRaw4000 = 1.2311469938157935;
constexpr double kTwostepCorr4000 = 1.3764641842333138;
} // namespace

TEST_CASE("ladder heights of skip-free-up walks are identically one") {
    RandomStream rng(1);
    for (const auto& law :
         {IncrementLaw::simple(), IncrementLaw::finite_table({1, -2}, {2.0 / 3.0, 1.0 / 3.0})}) {
        const auto ys = sample_ladder_heights(law, 3000, rng);
        REQUIRE(ys.size() == 3000);
        for (long long y : ys) CHECK(y == 1);
    }
}

TEST_CASE("two-step ladder heights: support, aperiodicity, mean") {
    // epoch durations have a universal t^{-1/2} tail, so the harvest size is
    // kept moderate to stay clear of the per-epoch step cap
    RandomStream rng(2);
    const auto ys = sample_ladder_heights(twostep(), 8000, rng);
    std::size_t ones = 0;
    double mean = 0.0;
    for (long long y : ys) {
        CHECK(y >= 1);
        CHECK(y <= 2); // jumps bounded by 2
        if (y == 1) ++ones;
        mean += static_cast<double>(y);
    }
    mean /= static_cast<double>(ys.size());
    CHECK(ones > 0); // P(Y = 1) > 0 (aperiodicity of the residual chain)
    const double p2 = mean - 1.0;
    const double se = std::sqrt(p2 * (1.0 - p2) / static_cast<double>(ys.size()));
    CHECK(std::abs(mean - kMuTwostep) <= 3.0 * se);
}

TEST_CASE("residual chain transitions") {
    SECTION("Y identically 1 pins the chain at 1") {
        auto z = residual_chain([] { return 1LL; }, 50);
        for (long long v : z) CHECK(v == 1);
    }
    SECTION("deterministic Y = 3 cycles 1,3,2,1,3,2,...") {
        auto z = residual_chain([] { return 3LL; }, 9);
        const std::vector<long long> expected = {1, 3, 2, 1, 3, 2, 1, 3, 2, 1};
        CHECK(z == expected);
    }
    SECTION("invalid sampler output is rejected") {
        CHECK_THROWS_AS(residual_chain([] { return 0LL; }, 3), std::invalid_argument);
    }
}

TEST_CASE("stationary distributions") {
    SECTION("Y identically 1") {
        const IntPmf pmf = {{1, 1.0}};
        const auto sd = stationary_distributions(pmf);
        CHECK(sd.mu == 1.0);
        REQUIRE(sd.pi.size() == 1);
        CHECK(sd.pi[0] == std::pair<long long, double>{1, 1.0});
        REQUIRE(sd.psi.size() == 1);
        CHECK(sd.psi[0].second == Catch::Approx(1.0).margin(1e-15));
    }
    SECTION("Y uniform on {1,2}") {
        const IntPmf pmf = {{1, 0.5}, {2, 0.5}};
        const auto sd = stationary_distributions(pmf);
        CHECK(sd.mu == Catch::Approx(1.5).margin(1e-15));
        REQUIRE(sd.pi.size() == 2);
        CHECK(sd.pi[0].second == Catch::Approx(2.0 / 3.0).margin(1e-14));
        CHECK(sd.pi[1].second == Catch::Approx(1.0 / 3.0).margin(1e-14));
        CHECK(sd.psi[0].second == Catch::Approx(1.0 / 3.0).margin(1e-14));
        CHECK(sd.psi[1].second == Catch::Approx(2.0 / 3.0).margin(1e-14));
        CHECK_FALSE(sd.renorm_flagged);
    }
    SECTION("distributions sum to one exactly for exact inputs") {
        const IntPmf pmf = {{1, 0.25}, {3, 0.5}, {7, 0.25}};
        const auto sd = stationary_distributions(pmf);
        double pi_sum = 0.0, psi_sum = 0.0;
        for (const auto& [k, p] : sd.pi) pi_sum += p;
        for (const auto& [k, p] : sd.psi) psi_sum += p;
        CHECK(pi_sum == Catch::Approx(1.0).margin(1e-14));
        CHECK(psi_sum == Catch::Approx(1.0).margin(1e-14));
    }
    SECTION("size-biasing identity on truncated pmfs") {
        // sum_k k^q pi_k * mu == sum_j p_j sum_{k<=j} k^q, exactly
        const IntPmf pmf = {{1, 0.3}, {2, 0.25}, {4, 0.25}, {9, 0.2}};
        const auto sd = stationary_distributions(pmf);
        for (double q : {1.0, 2.0}) {
            double lhs = 0.0;
            for (const auto& [k, p] : sd.pi)
                lhs += std::pow(static_cast<double>(k), q) * p;
            lhs *= sd.mu;
            double rhs = 0.0;
            for (const auto& [j, pj] : pmf) {
                double inner = 0.0;
                for (long long k = 1; k <= j; ++k) inner += std::pow(static_cast<double>(k), q);
                rhs += pj * inner;
            }
            CHECK(lhs == Catch::Approx(rhs).epsilon(1e-12));
        }
    }
    SECTION("rejects invalid inputs") {
        CHECK_THROWS_AS(stationary_distributions({}), std::invalid_argument);
        CHECK_THROWS_AS(stationary_distributions({{0, 1.0}}), std::invalid_argument);
        CHECK_THROWS_AS(stationary_distributions({{1, 0.4}}, 1e-9), std::invalid_argument);
    }
}

TEST_CASE("Spitzer series") {
    SECTION("SSRW: frozen partials, raw -> sqrt(2), corrected -> 1") {
        const auto law = IncrementLaw::simple();
        const auto sp400 = spitzer_mu(law, 400);
        CHECK(sp400.raw == Catch::Approx(kRaw400).margin(1e-9));
        CHECK(sp400.corrected == Catch::Approx(kCorr400).margin(1e-9));
        const auto sp = spitzer_mu(law, 4000);
        CHECK(sp.raw == Catch::Approx(kRaw4000).margin(1e-9));
        CHECK(sp.corrected == Catch::Approx(kCorr4000).margin(1e-9));
        CHECK(std::abs(sp.raw - std::sqrt(2.0)) <= 0.01);
        CHECK(std::abs(sp.corrected - 1.0) <= 0.01);
        CHECK(sp.last_term < 1e-5);
        // symmetric law: every term is P(S_n = 0)/(2n) >= 0
        for (std::size_t i = 1; i < sp.partials.size(); ++i)
            CHECK(sp.partials[i] >= sp.partials[i - 1]);
    }
    SECTION("two-step law: corrected value matches the exact mean ladder height") {
        const auto sp = spitzer_mu(twostep(), 4000);
        CHECK(sp.raw == Catch::Approx(kTwostepRaw4000).margin(1e-9));
        CHECK(sp.corrected == Catch::Approx(kTwostepCorr4000).margin(1e-9));
        CHECK(std::abs(sp.corrected - kMuTwostep) <= 0.01); // truncation tail ~ 0.4/sqrt(n_max)
    }
    SECTION("skip-free law: simulated E Y is exactly one") {
        const auto law = IncrementLaw::finite_table({1, -2}, {2.0 / 3.0, 1.0 / 3.0});
        RandomStream rng(3);
        const auto ys = sample_ladder_heights(law, 1000, rng);
        for (long long y : ys) CHECK(y == 1);
    }
    SECTION("infinite variance is unsupported") {
        CHECK_THROWS_AS(spitzer_mu(IncrementLaw::stable_tail(1.5), 100), std::invalid_argument);
    }
}

TEST_CASE("pathwise equivalence: chain vs first-passage overshoots") {
    const auto law = twostep();
    const std::uint64_t seed = 0xFEEDFACE;
    std::vector<long long> ladder;
    {
        RandomStream rng(seed);
        law.with_drawer(rng, [&](auto& d) {
            long long s = 0, running_max = 0;
            while (running_max <= 202) {
                s += d.next();
                if (s > running_max) {
                    ladder.push_back(s - running_max);
                    running_max = s;
                }
            }
        });
    }
    std::vector<long long> levels(200);
    for (long long y = 0; y < 200; ++y) levels[static_cast<std::size_t>(y)] = y;
    RandomStream rng2(seed);
    const auto mp = first_passage_multi(law, 0, levels, rng2);
    REQUIRE(mp.crossed == 200);
    std::size_t idx = 0;
    const auto chain = residual_chain(
        [&]() -> long long {
            REQUIRE(idx < ladder.size());
            return ladder[idx++];
        },
        200);
    for (long long y = 0; y < 200; ++y)
        CHECK(chain[static_cast<std::size_t>(y + 1)] ==
              mp.overshoots[static_cast<std::size_t>(y)]);
}

TEST_CASE("overshoot envelope over a level grid") {
    SECTION("SSRW: Z is identically 1, so every moment is 1") {
        RandomStream rng(4);
        const long long grid[] = {10, 100, 1000};
        const auto table =
            overshoot_envelope_check(IncrementLaw::simple(), 3.0, grid, 8, rng);
        for (const auto& row : table.rows) {
            CHECK(row.moment == Catch::Approx(1.0).margin(1e-15));
            CHECK(row.mean_z == Catch::Approx(1.0).margin(1e-15));
            CHECK(row.censored_fraction == 0.0);
        }
    }
    SECTION("two-step law: E[Z] stable across decades at 3 SE") {
        RandomStream rng(5);
        const long long grid[] = {10, 100, 1000};
        const auto table = overshoot_envelope_check(twostep(), 3.0, grid, 16, rng);
        REQUIRE(table.rows.size() == 3);
        for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
            const auto& a = table.rows[i];
            const auto& b = table.rows[i + 1];
            const double se = std::sqrt(a.se * a.se + b.se * b.se);
            CHECK(b.moment - a.moment <= 3.0 * se);
        }
        for (const auto& row : table.rows) {
            double mass = 0.0;
            for (const auto& [z, p] : row.z_pmf) {
                CHECK(z >= 1);
                CHECK(z <= 2);
                mass += p;
            }
            CHECK(mass == Catch::Approx(1.0).margin(1e-12));
        }
    }
    SECTION("rejects p <= 2") {
        RandomStream rng(6);
        const long long grid[] = {10};
        CHECK_THROWS_AS(overshoot_envelope_check(twostep(), 2.0, grid, 4, rng),
                        std::invalid_argument);
    }
}

TEST_CASE("pmf_from_samples") {
    const std::vector<long long> samples = {1, 1, 2, 1, 3, 2, 1, 1};
    const auto pmf = pmf_from_samples(samples);
    REQUIRE(pmf.size() == 3);
    CHECK(pmf[0] == std::pair<long long, double>{1, 0.625});
    CHECK(pmf[1] == std::pair<long long, double>{2, 0.25});
    CHECK(pmf[2] == std::pair<long long, double>{3, 0.125});
}
