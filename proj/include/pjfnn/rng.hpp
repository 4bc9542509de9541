#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace pjfnn {

// Seeded generator whose derived draws are bit-identical across standard
// libraries. std::mt19937_64's raw output is fully specified; the
// std::*_distribution adaptors are not, so they are avoided here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). Rejection sampling, n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // Uniform float in [0, 1) with 24 bits of resolution.
    float uniform() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }

    // Uniform double in [0, 1) with 53 bits of resolution.
    double uniform_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform_double() < p; }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[below(i)]);
        }
    }

    // Derives an independent stream, e.g. one per epoch.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace pjfnn
