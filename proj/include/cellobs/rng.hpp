#pragma once

#include <cstdint>

namespace cellobs {

// Deterministic 64-bit PRNG (SplitMix64, Steele/Lea/Flood 2014).
//
// Used instead of <random> engines + std::uniform_real_distribution because
// the distribution's output sequence is implementation-defined; this class
// produces bit-identical streams on every platform, which the reproducibility
// contract (bitwise-identical metrics for identical seeds) depends on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Independent child stream for a sub-task (e.g. one Monte-Carlo run).
    // Mixing the index through the generator itself keeps nearby (seed, index)
    // pairs statistically unrelated.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
        return r.next_u64();
    }

private:
    std::uint64_t state_;
};

}  // namespace cellobs
