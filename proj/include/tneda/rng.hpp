#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tneda {

/// SplitMix64 finalizer, used to derive well-mixed child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded random stream. Every random operation in the library takes one of
/// these explicitly; there is no global generator.
///
/// `split(tag)` derives an independent child stream from the original seed and
/// a tag, without advancing the parent, so adding a consumer (for instance a
/// reference model) never perturbs the draws seen by existing consumers.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    Rng split(std::uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(tag + 0x5851f42d4c957f2dULL))); }

    Rng split(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : tag) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return split(h);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), unbiased (rejection).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via the Marsaglia polar method (no cached state).
    double normal() {
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace tneda
