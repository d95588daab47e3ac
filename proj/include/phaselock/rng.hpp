#pragma once

#include <cmath>
#include <cstdint>

namespace phaselock {

// SplitMix64, used to expand a user seed into generator state and to
// derive independent per-cell seeds in sweeps.
struct SplitMix64 {
    std::uint64_t state;

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

// Derives the seed for sweep cell `counter` from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
    SplitMix64 sm{master ^ (0x9e3779b97f4a7c15ULL * (counter + 1))};
    return sm.next();
}

// xoshiro256++ (Blackman & Vigna). Hand-rolled so that simulation streams
// are reproducible independent of the standard library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        SplitMix64 sm{seed ^ (stream * 0xd1b54a32d192ed03ULL)};
        for (auto& w : s_) w = sm.next();
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

    // Uniform in [0, 1), 53-bit resolution.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential inter-arrival time with the given rate (events per second).
    double exponential(double rate) { return -std::log(1.0 - u01()) / rate; }

    // Standard normal via the polar method. Draw order is deterministic.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * u01() - 1.0;
            v = 2.0 * u01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace phaselock
