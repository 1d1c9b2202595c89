#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace xmalkit {

// Deterministic random source. All randomness in the library flows through
// this class. The transforms on top of the raw mt19937_64 stream are written
// out by hand instead of going through <random> distributions, because the
// distribution algorithms are implementation-defined and we promise
// bit-identical runs for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 bits of entropy.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Rejection-sampled so every value is
    // exactly equally likely.
    std::uint64_t uniform_int(std::uint64_t n) {
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates. Kept here (rather than std::shuffle) for the same
    // reproducibility reason as the other transforms.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace xmalkit
