#pragma once

#include <array>
#include <cstdint>

namespace idla {

// splitmix64 finalizer (Vigna). Used for seeding and for deriving child
// stream keys; never used as the bulk generator.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ (Blackman & Vigna). Fully specified, so documents produced
// from a given seed are identical across platforms.
//
// Stream derivation rule (the "fixed, documented derivation function"):
//   child(key, index) seeds a splitmix64 sequence at
//   key ^ mix64((index + 1) * 0x9e3779b97f4a7c15) and takes its first four
//   outputs as the xoshiro state. Replica streams are child(master, replica);
//   per-walker streams inside one run are child(replica_key, walker_index).
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) {
        std::uint64_t z = seed;
        for (auto& w : s_) {
            z += 0x9e3779b97f4a7c15ULL;
            std::uint64_t x = z;
            x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
            x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
            w = x ^ (x >> 31);
        }
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1; // cannot stay all-zero
    }

    static RandomStream child(std::uint64_t key, std::uint64_t index) {
        return RandomStream(key ^ mix64((index + 1) * 0x9e3779b97f4a7c15ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on [0,1), 53-bit resolution
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform on (0,1); rejects the single zero outcome
    double next_open01() {
        for (;;) {
            double u = next_double();
            if (u > 0.0) return u;
        }
    }

    // uniform integer in [0, n), Lemire's multiply-shift with rejection
    std::uint64_t next_below(std::uint64_t n) {
        using u128 = unsigned __int128;
        std::uint64_t x = next_u64();
        u128 m = static_cast<u128>(x) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t thresh = (0 - n) % n;
            while (lo < thresh) {
                x = next_u64();
                m = static_cast<u128>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<std::uint64_t, 4> s_{};
};

} // namespace idla
