#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idla/walker.hpp"

using namespace idla;

namespace {
IncrementLaw twostep() {
    return IncrementLaw::finite_table({-2, -1, 1, 2}, {0.25, 0.25, 0.25, 0.25});
}
} // namespace

TEST_CASE("run_until_exit basics") {
    const auto law = IncrementLaw::simple();

    SECTION("degenerate interval exits in one step") {
        RandomStream rng(1);
        for (int i = 0; i < 100; ++i) {
            const auto out = run_until_exit(law, 0, 0, 0, rng);
            CHECK(out.steps == 1);
            CHECK((out.terminal_site == 1 || out.terminal_site == -1));
            CHECK(out.overshoot == 1);
        }
    }

    SECTION("start outside returns immediately") {
        RandomStream rng(2);
        const auto out = run_until_exit(law, 17, -3, 3, rng);
        CHECK(out.steps == 0);
        CHECK(out.terminal_site == 17);
        CHECK(out.verdict == WalkVerdict::ExitedRight);
        CHECK(out.overshoot == 14);
        const auto left = run_until_exit(law, -9, -3, 3, rng);
        CHECK(left.verdict == WalkVerdict::ExitedLeft);
        CHECK(left.overshoot == 6);
    }

    SECTION("unit steps always overshoot by one; sides are balanced") {
        RandomStream rng(3);
        const long long N = 40;
        int right = 0;
        const int reps = 4000;
        for (int i = 0; i < reps; ++i) {
            const auto out = run_until_exit(law, 0, -N, N, rng);
            CHECK(out.overshoot == 1);
            CHECK((out.terminal_site == N + 1 || out.terminal_site == -N - 1));
            if (out.verdict == WalkVerdict::ExitedRight) ++right;
        }
        const double frac = static_cast<double>(right) / reps;
        CHECK(std::abs(frac - 0.5) <= 3.0 * std::sqrt(0.25 / reps));
    }

    SECTION("mean exit time matches the classical formula") {
        RandomStream rng(4);
        const long long N = 100;
        const int reps = 10000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < reps; ++i) {
            const auto out = run_until_exit(law, 0, -N, N, rng);
            const double s = static_cast<double>(out.steps);
            sum += s;
            sum2 += s * s;
        }
        const double mean = sum / reps;
        const double sd = std::sqrt((sum2 / reps - mean * mean) / (reps - 1));
        const double expected = static_cast<double>((N + 1) * (N + 1));
        CHECK(std::abs(mean - expected) <= 3.0 * sd);
    }

    SECTION("symmetric laws exit symmetric intervals evenly (several N)") {
        const auto heavy = IncrementLaw::stable_tail(1.5);
        RandomStream rng(5);
        for (long long N : {20LL, 200LL}) {
            int right = 0;
            const int reps = 4000;
            for (int i = 0; i < reps; ++i)
                if (run_until_exit(heavy, 0, -N, N, rng).verdict == WalkVerdict::ExitedRight)
                    ++right;
            CHECK(std::abs(right / static_cast<double>(reps) - 0.5) <=
                  3.0 * std::sqrt(0.25 / reps));
        }
    }
}

TEST_CASE("run_hit_or_exit") {
    const auto law = twostep();

    SECTION("start at target hits with zero steps") {
        RandomStream rng(6);
        const auto out = run_hit_or_exit(law, 5, 5, -10, 10, rng);
        CHECK(out.verdict == WalkVerdict::HitTarget);
        CHECK(out.steps == 0);
        CHECK(out.terminal_site == 5);
    }

    SECTION("pathwise agreement with run_until_exit on non-hit paths") {
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            RandomStream r1(seed), r2(seed);
            const auto hit = run_hit_or_exit(law, 3, 0, -15, 15, r1);
            const auto exit = run_until_exit(law, 3, -15, 15, r2);
            if (hit.verdict != WalkVerdict::HitTarget) {
                CHECK(hit.terminal_site == exit.terminal_site);
                CHECK(hit.steps == exit.steps);
                CHECK(hit.verdict == exit.verdict);
                CHECK(hit.overshoot == exit.overshoot);
            } else {
                CHECK(hit.steps <= exit.steps);
            }
        }
    }

    SECTION("SSRW from N/2: hit frequency near one half") {
        const auto simple = IncrementLaw::simple();
        RandomStream rng(7);
        const long long N = 200;
        const int reps = 4000;
        int hits = 0;
        for (int i = 0; i < reps; ++i)
            if (run_hit_or_exit(simple, N / 2, 0, -N, N, rng).verdict == WalkVerdict::HitTarget)
                ++hits;
        const double frac = static_cast<double>(hits) / reps;
        CHECK(std::abs(frac - 0.5) <= 3.0 * std::sqrt(0.25 / reps) + 0.02);
    }
}

TEST_CASE("first_passage_over") {
    SECTION("unit upward steps overshoot by exactly one") {
        const auto law = IncrementLaw::simple();
        RandomStream rng(8);
        for (long long y : {0LL, 3LL, 17LL}) {
            const auto out = first_passage_over(law, 0, y, rng);
            CHECK(out.overshoot == 1);
            CHECK(out.terminal_site == y + 1);
        }
    }

    SECTION("skip-free upward law overshoots by exactly one") {
        const auto law = IncrementLaw::finite_table({1, -2}, {2.0 / 3.0, 1.0 / 3.0});
        RandomStream rng(9);
        for (int i = 0; i < 200; ++i) CHECK(first_passage_over(law, 0, 25, rng).overshoot == 1);
    }

    SECTION("overshoot is at least one and level precondition holds") {
        const auto law = twostep();
        RandomStream rng(10);
        for (int i = 0; i < 500; ++i) {
            const auto out = first_passage_over(law, 0, 10, rng);
            CHECK(out.overshoot >= 1);
            CHECK(out.overshoot <= 2);
            CHECK(out.terminal_site > 10);
        }
        CHECK_THROWS_AS(first_passage_over(law, 5, 3, rng), std::invalid_argument);
    }
}

TEST_CASE("first_passage_multi agrees with single-level replays") {
    const auto law = twostep();
    const std::vector<long long> levels = {0, 1, 2, 5, 9, 20, 33, 50};
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        RandomStream rng(seed);
        const auto mp = first_passage_multi(law, 0, levels, rng);
        REQUIRE(mp.crossed == levels.size());
        CHECK_FALSE(mp.capped);
        for (std::size_t i = 0; i < levels.size(); ++i) {
            RandomStream replay(seed);
            const auto single = first_passage_over(law, 0, levels[i], replay);
            CHECK(single.overshoot == mp.overshoots[i]);
        }
    }
    RandomStream rng(1);
    const std::vector<long long> bad = {5, 5};
    CHECK_THROWS_AS(first_passage_multi(law, 0, bad, rng), std::invalid_argument);
}

TEST_CASE("step caps") {
    const auto law = IncrementLaw::simple();

    SECTION("cap exceeded carries partial state") {
        RandomStream rng(11);
        try {
            run_until_exit(law, 0, -1000000, 1000000, rng, 50);
            FAIL("expected CapExceeded");
        } catch (const CapExceeded& e) {
            CHECK(e.steps_taken == 50);
            CHECK(std::abs(e.position) <= 50);
        }
    }

    SECTION("multi-level passage reports a capped prefix instead of throwing") {
        RandomStream rng(12);
        const std::vector<long long> levels = {1, 1000000};
        const auto mp = first_passage_multi(law, 0, levels, rng, 1000);
        CHECK(mp.capped);
        CHECK(mp.crossed <= 1);
        CHECK(mp.steps == 1000);
    }
}

TEST_CASE("trace mode records the full path") {
    const auto law = twostep();
    RandomStream rng(13);
    std::vector<long long> trace;
    const auto out = run_until_exit(law, 2, -8, 8, rng, kDefaultStepCap, &trace);
    REQUIRE(trace.size() == out.steps + 1);
    CHECK(trace.front() == 2);
    CHECK(trace.back() == out.terminal_site);
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        const long long step = trace[i + 1] - trace[i];
        CHECK(law.pmf(step) > 0.0);
        if (i + 2 < trace.size()) {
            CHECK(trace[i + 1] >= -8);
            CHECK(trace[i + 1] <= 8);
        }
    }
}
