#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "idla/increments.hpp"
#include "idla/rng.hpp"

namespace idla {

inline constexpr std::uint64_t kDefaultStepCap = 10'000'000'000ULL;

enum class WalkVerdict { ExitedLeft, ExitedRight, HitTarget };

inline const char* to_string(WalkVerdict v) {
    switch (v) {
        case WalkVerdict::ExitedLeft: return "exited_left";
        case WalkVerdict::ExitedRight: return "exited_right";
        case WalkVerdict::HitTarget: return "hit_target";
    }
    return "?";
}

struct WalkOutcome {
    long long terminal_site = 0;
    std::uint64_t steps = 0;
    WalkVerdict verdict = WalkVerdict::ExitedRight;
    long long overshoot = 0; // distance past the crossed endpoint; 0 for HitTarget
};

// Recurrence makes every stopping rule here a.s. finite, so a hit cap means a
// bug or an inadmissible law; this error carries the partial state.
class CapExceeded : public std::runtime_error {
  public:
    CapExceeded(long long position, std::uint64_t steps_taken)
        : std::runtime_error("step cap exceeded after " + std::to_string(steps_taken) +
                             " steps at position " + std::to_string(position)),
          position(position), steps_taken(steps_taken) {}
    long long position;
    std::uint64_t steps_taken;
};

namespace detail {

template <class Drawer>
WalkOutcome exit_loop(Drawer& d, long long start, long long a, long long b,
                      std::uint64_t step_cap, std::vector<long long>* trace) {
    long long s = start;
    std::uint64_t n = 0;
    if (trace) trace->push_back(s);
    while (s >= a && s <= b) {
        if (n >= step_cap) throw CapExceeded(s, n);
        s += d.next();
        ++n;
        if (trace) trace->push_back(s);
    }
    WalkOutcome out;
    out.terminal_site = s;
    out.steps = n;
    if (s < a) {
        out.verdict = WalkVerdict::ExitedLeft;
        out.overshoot = a - s;
    } else {
        out.verdict = WalkVerdict::ExitedRight;
        out.overshoot = s - b;
    }
    return out;
}

template <class Drawer>
WalkOutcome hit_or_exit_loop(Drawer& d, long long start, long long target, long long a,
                             long long b, std::uint64_t step_cap,
                             std::vector<long long>* trace) {
    long long s = start;
    std::uint64_t n = 0;
    if (trace) trace->push_back(s);
    for (;;) {
        if (s == target) return {s, n, WalkVerdict::HitTarget, 0};
        if (s < a) return {s, n, WalkVerdict::ExitedLeft, a - s};
        if (s > b) return {s, n, WalkVerdict::ExitedRight, s - b};
        if (n >= step_cap) throw CapExceeded(s, n);
        s += d.next();
        ++n;
        if (trace) trace->push_back(s);
    }
}

template <class Drawer>
WalkOutcome passage_loop(Drawer& d, long long start, long long level,
                         std::uint64_t step_cap, std::vector<long long>* trace) {
    long long s = start;
    std::uint64_t n = 0;
    if (trace) trace->push_back(s);
    while (s <= level) {
        if (n >= step_cap) throw CapExceeded(s, n);
        s += d.next();
        ++n;
        if (trace) trace->push_back(s);
    }
    return {s, n, WalkVerdict::ExitedRight, s - level};
}

} // namespace detail

// Walk from `start` until the first step outside the closed interval [a, b].
// A start already outside returns immediately with steps = 0.
inline WalkOutcome run_until_exit(const IncrementLaw& law, long long start, long long a,
                                  long long b, RandomStream& rng,
                                  std::uint64_t step_cap = kDefaultStepCap,
                                  std::vector<long long>* trace = nullptr) {
    if (a > b) throw std::invalid_argument("run_until_exit: interval has a > b");
    return law.with_drawer(
        rng, [&](auto& d) { return detail::exit_loop(d, start, a, b, step_cap, trace); });
}

// Stop at min(first hitting time of `target`, first exit from [a, b]).
// start == target reports HitTarget with steps = 0.
inline WalkOutcome run_hit_or_exit(const IncrementLaw& law, long long start, long long target,
                                   long long a, long long b, RandomStream& rng,
                                   std::uint64_t step_cap = kDefaultStepCap,
                                   std::vector<long long>* trace = nullptr) {
    if (a > b) throw std::invalid_argument("run_hit_or_exit: interval has a > b");
    return law.with_drawer(rng, [&](auto& d) {
        return detail::hit_or_exit_loop(d, start, target, a, b, step_cap, trace);
    });
}

// First passage strictly above `level`; the outcome's overshoot is S - level >= 1.
inline WalkOutcome first_passage_over(const IncrementLaw& law, long long start, long long level,
                                      RandomStream& rng,
                                      std::uint64_t step_cap = kDefaultStepCap,
                                      std::vector<long long>* trace = nullptr) {
    if (level < start) throw std::invalid_argument("first_passage_over: level < start");
    return law.with_drawer(
        rng, [&](auto& d) { return detail::passage_loop(d, start, level, step_cap, trace); });
}

// One pass over an ascending level grid, recording the overshoot at each level
// as it is first exceeded. A hit step cap keeps the crossed prefix (`capped`
// set, `crossed` < levels.size()); crossings already recorded are exact.
struct MultiPassage {
    std::vector<long long> overshoots; // valid for indices < crossed
    std::size_t crossed = 0;
    bool capped = false;
    std::uint64_t steps = 0;
};

inline MultiPassage first_passage_multi(const IncrementLaw& law, long long start,
                                        std::span<const long long> levels, RandomStream& rng,
                                        std::uint64_t step_cap = kDefaultStepCap) {
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (levels[i] >= levels[i + 1])
            throw std::invalid_argument("first_passage_multi: levels must be strictly ascending");
    if (!levels.empty() && levels.front() < start)
        throw std::invalid_argument("first_passage_multi: first level < start");
    MultiPassage out;
    out.overshoots.assign(levels.size(), 0);
    law.with_drawer(rng, [&](auto& d) {
        long long s = start;
        std::uint64_t n = 0;
        std::size_t idx = 0;
        while (idx < levels.size()) {
            while (idx < levels.size() && s > levels[idx]) {
                out.overshoots[idx] = s - levels[idx];
                ++idx;
            }
            if (idx == levels.size()) break;
            if (n >= step_cap) {
                out.capped = true;
                break;
            }
            s += d.next();
            ++n;
        }
        out.crossed = idx;
        out.steps = n;
    });
    return out;
}

} // namespace idla
