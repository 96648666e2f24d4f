#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idla/cluster.hpp"
#include "idla/harness.hpp"

using namespace idla;

namespace {
IncrementLaw twostep() {
    return IncrementLaw::finite_table({-2, -1, 1, 2}, {0.25, 0.25, 0.25, 0.25});
}
} // namespace

TEST_CASE("fresh cluster is the germ") {
    Cluster c;
    CHECK(c.occupied_count() == 1);
    CHECK(c.contains(0));
    CHECK(c.walkers() == 0);
    CHECK(c.inner_radius() == 0);
    CHECK(c.sigma(0) == 0);
    CHECK(c.is_interval());
    c.check_invariants_full();
}

TEST_CASE("first dispatch settles a neighbour for SSRW") {
    const auto law = IncrementLaw::simple();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Cluster c;
        RandomStream rng(seed);
        const long long site = c.dispatch_one(law, rng);
        CHECK((site == 1 || site == -1));
        CHECK(c.occupied_count() == 2);
        CHECK(c.walkers() == 1);
    }
}

TEST_CASE("occupied count and invariants across laws") {
    for (const auto& name : law_preset_names()) {
        const auto law = law_from_spec(name);
        Cluster c;
        RandomStream base(7);
        for (int m = 1; m <= 300; ++m) {
            RandomStream rng = RandomStream::child(404, static_cast<std::uint64_t>(m));
            c.dispatch_one(law, rng);
            CHECK(c.occupied_count() == static_cast<std::size_t>(m) + 1);
        }
        c.check_invariants_full();
        CHECK(2 * c.inner_radius() <= c.walkers());
    }
}

TEST_CASE("SSRW cluster is a contiguous interval with L + R = m") {
    const auto law = IncrementLaw::simple();
    Cluster c;
    for (int m = 1; m <= 2000; ++m) {
        RandomStream rng = RandomStream::child(11, static_cast<std::uint64_t>(m));
        c.dispatch_one(law, rng);
        REQUIRE(c.is_interval());
        CHECK(c.max_site() - c.min_site() == c.walkers());
        CHECK(c.inner_radius() == std::min(-c.min_site(), c.max_site()));
    }
    c.check_invariants_full();
}

TEST_CASE("run_cluster records checkpoints, coverage, and respects bounds") {
    const auto law = twostep();
    Cluster c;
    const std::vector<long long> cps = {100, 250, 500};
    const auto res = run_cluster(c, law, 500, 2024, cps);
    REQUIRE(res.checkpoints.size() == 3);
    for (const auto& cp : res.checkpoints) {
        CHECK(2 * cp.r <= cp.m); // r_m <= m/2
    }
    for (const auto& [x, sx] : res.coverage) {
        CHECK(sx >= static_cast<std::uint64_t>(2 * x)); // sigma_x >= 2x
        if (x > 0) CHECK(sx >= res.coverage[static_cast<std::size_t>(x - 1)].second);
    }

    SECTION("inversion: sigma_x <= m iff r_m >= x") {
        for (const auto& cp : res.checkpoints) {
            for (const auto& [x, sx] : res.coverage) {
                const bool covered_by_m = sx <= static_cast<std::uint64_t>(cp.m);
                CHECK(covered_by_m == (cp.r >= x));
            }
        }
    }

    SECTION("deterministic given the seed") {
        Cluster c2;
        const auto res2 = run_cluster(c2, law, 500, 2024, cps);
        CHECK(res2.coverage == res.coverage);
        for (std::size_t i = 0; i < res.checkpoints.size(); ++i) {
            CHECK(res2.checkpoints[i].m == res.checkpoints[i].m);
            CHECK(res2.checkpoints[i].r == res.checkpoints[i].r);
        }
        CHECK(res2.to_json().dump() == res.to_json().dump());
    }
}

TEST_CASE("lost particles counter") {
    Cluster c;
    CHECK(c.lost_particles(10, 2.0) == 0);

    const auto law = IncrementLaw::stable_tail(1.5);
    for (int m = 1; m <= 400; ++m) {
        RandomStream rng = RandomStream::child(5150, static_cast<std::uint64_t>(m));
        c.dispatch_one(law, rng);
    }
    const long long x = std::max<long long>(1, c.inner_radius());

    SECTION("nonincreasing in A") {
        long long prev = std::numeric_limits<long long>::max();
        for (double A : {1.1, 1.5, 2.0, 4.0, 16.0}) {
            const long long k = c.lost_particles(x, A);
            CHECK(k <= prev);
            prev = k;
        }
    }

    SECTION("partition identity") {
        const double A = 2.5;
        long long inside = 0;
        const long long bound = static_cast<long long>(std::floor(A * static_cast<double>(x)));
        for (long long s = -bound; s <= bound; ++s)
            if (c.contains(s)) ++inside;
        CHECK(static_cast<long long>(c.occupied_count()) == c.lost_particles(x, A) + inside);
    }
}

TEST_CASE("eventual filling at small radius for every preset") {
    for (const auto& name : law_preset_names()) {
        const auto law = law_from_spec(name);
        Cluster c;
        RunLimits limits;
        limits.global_step_budget = 2'000'000'000ULL;
        const long long sigma10 = run_until_radius(c, law, 10, 31337, limits);
        CHECK(c.inner_radius() >= 10);
        CHECK(sigma10 >= 20); // sigma_x >= 2x
        CHECK(static_cast<std::uint64_t>(sigma10) == c.sigma(10));
    }
}

TEST_CASE("heavy-tail cluster keeps full invariants under gaps") {
    const auto law = IncrementLaw::stable_tail(1.3);
    Cluster c;
    for (int m = 1; m <= 1500; ++m) {
        RandomStream rng = RandomStream::child(777, static_cast<std::uint64_t>(m));
        c.dispatch_one(law, rng);
    }
    c.check_invariants_full();
    // with alpha = 1.3 jumps, some settled sites should lie beyond the core
    CHECK(c.lost_particles(std::max<long long>(1, c.inner_radius()), 2.0) > 0);
}

TEST_CASE("settle_external refuses occupied sites") {
    Cluster c;
    CHECK_THROWS_AS(c.settle_external(0), std::logic_error);
    c.settle_external(3);
    CHECK(c.occupied_count() == 2);
    CHECK_THROWS_AS(c.settle_external(3), std::logic_error);
}

TEST_CASE("per-walk cap propagates from the walker") {
    const auto law = IncrementLaw::simple();
    Cluster c;
    // grow a bit so walks take more than one step
    for (int m = 1; m <= 50; ++m) {
        RandomStream rng = RandomStream::child(64, static_cast<std::uint64_t>(m));
        c.dispatch_one(law, rng);
    }
    RandomStream rng(1);
    CHECK_THROWS_AS(c.dispatch_one(law, rng, 2), CapExceeded);
}

TEST_CASE("run artifact serialization") {
    const auto law = twostep();
    Cluster c;
    const std::vector<long long> cps = {50, 100};
    auto res = run_cluster(c, law, 100, 99, cps);
    res.wall_time_ms = 12.5;
    const auto j = res.to_json();
    CHECK(j["seed"] == 99);
    CHECK(j["m_total"] == 100);
    CHECK(j["law"]["kind"] == "table");
    CHECK(j["checkpoints"].size() == 2);
    CHECK(j["coverage"].size() == res.coverage.size());
    CHECK(j.contains("wall_time"));

    std::ostringstream cp_csv, cov_csv;
    res.write_checkpoints_csv(cp_csv);
    res.write_coverage_csv(cov_csv);
    CHECK(cp_csv.str().rfind("m,r_m\n", 0) == 0);
    CHECK(cov_csv.str().rfind("x,sigma_x\n", 0) == 0);
}
