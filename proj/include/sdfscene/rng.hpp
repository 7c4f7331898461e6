// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace sdfscene {

// Self-contained counter-free PRNG (splitmix64 core). We avoid the standard
// <random> distributions because their output is implementation-defined and
// dataset regeneration must be bitwise reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    // Derive an independent stream, e.g. one per scene id.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        Rng r(seed);
        r.state_ ^= 0x9e3779b97f4a7c15ull * (stream_id + 1);
        r.next();
        r.next();
        return r;
    }

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return next() % n; }

    // Standard normal via Box-Muller; caches the second deviate.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace sdfscene
