#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"
#include "tneda/rng.hpp"

namespace tneda {

/// Every distinct solution evaluated during a run, in insertion order. The
/// number of entries is the number of objective-function calls spent.
class SolutionBank {
public:
    struct Entry {
        BitString x;
        double f;
        std::size_t generation;
    };

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const Entry& operator[](std::size_t i) const noexcept { return entries_[i]; }

    bool contains(const BitString& x) const { return index_.contains(x); }

    std::optional<double> lookup(const BitString& x) const {
        auto it = index_.find(x);
        if (it == index_.end()) return std::nullopt;
        return entries_[it->second].f;
    }

    /// Inserts a new solution; returns false (and changes nothing) for duplicates.
    bool insert(BitString x, double f, std::size_t generation) {
        if (index_.contains(x)) return false;
        index_.emplace(x, entries_.size());
        if (entries_.empty() || f < entries_[best_].f) best_ = entries_.size();
        entries_.push_back({std::move(x), f, generation});
        return true;
    }

    /// Best entry; the earliest one wins ties.
    const Entry& best() const {
        detail::require(!entries_.empty(), "SolutionBank: empty");
        return entries_[best_];
    }

    /// Indices of the k best entries by objective, ties by insertion order.
    std::vector<std::size_t> top_k(std::size_t k) const {
        std::vector<std::size_t> idx(entries_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        k = std::min(k, idx.size());
        auto cmp = [this](std::size_t a, std::size_t b) {
            return entries_[a].f < entries_[b].f || (entries_[a].f == entries_[b].f && a < b);
        };
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), cmp);
        idx.resize(k);
        return idx;
    }

    std::vector<double> objectives() const {
        std::vector<double> f;
        f.reserve(entries_.size());
        for (const auto& e : entries_) f.push_back(e.f);
        return f;
    }

private:
    std::vector<Entry> entries_;
    std::unordered_map<BitString, std::size_t, BitStringHash> index_;
    std::size_t best_ = 0;
};

// ---------------------------------------------------------------- temperature

/// T0^(1 - t / t_max): T0 at t = 0 and exactly 1 at t = t_max.
inline double annealed_temperature(double t0, std::size_t t, std::size_t t_max) {
    detail::require(t0 > 0.0, "annealed_temperature: T0 must be positive");
    detail::require(t_max >= 1 && t <= t_max, "annealed_temperature: need 0 <= t <= t_max, t_max >= 1");
    if (t == t_max) return 1.0;
    return std::pow(t0, 1.0 - static_cast<double>(t) / static_cast<double>(t_max));
}

/// T such that the rank-th best solution is `ratio` times less likely than the
/// best: T = (f_rank - f_1) / log(ratio). When f_rank ties with f_1 the best
/// objective not tied for first is used instead. Returns nullopt when every
/// objective is equal (no usable gap).
inline std::optional<double> adaptive_temperature(std::span<const double> objectives, std::size_t rank = 5,
                                                  double ratio = 3.0) {
    detail::require(rank >= 2, "adaptive_temperature: rank must be >= 2");
    detail::require(ratio > 1.0, "adaptive_temperature: ratio must exceed 1");
    std::vector<double> f;
    f.reserve(objectives.size());
    for (double v : objectives)
        if (std::isfinite(v)) f.push_back(v);
    if (f.size() < 2) return std::nullopt;
    const std::size_t k = std::min(rank, f.size());
    std::partial_sort(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(k), f.end());
    const double f1 = f[0];
    double fr = f[k - 1];
    if (fr == f1) {
        double next = std::numeric_limits<double>::infinity();
        for (double v : f)
            if (v > f1) next = std::min(next, v);
        if (!std::isfinite(next)) return std::nullopt;
        fr = next;
    }
    return (fr - f1) / std::log(ratio);
}

inline std::optional<double> adaptive_temperature(const SolutionBank& bank, std::size_t rank = 5, double ratio = 3.0) {
    const auto f = bank.objectives();
    return adaptive_temperature(std::span<const double>(f), rank, ratio);
}

/// Temperature used when the adaptive rule has no gap to work with.
inline constexpr double kFloorTemperature = 1e-12;

struct AnnealedSchedule {
    /// Initial temperature; nullopt means "sample std of the initial population's costs".
    std::optional<double> t0;
    std::size_t t_max = 60;
};

struct AdaptiveGapSchedule {
    std::size_t rank = 5;
    double ratio = 3.0;
};

struct FixedSchedule {
    double temperature = 1.0;
};

using TemperatureSchedule = std::variant<AnnealedSchedule, AdaptiveGapSchedule, FixedSchedule>;

// ---------------------------------------------------------------- selection

struct AllUniquePool {};
struct TopKPool {
    std::size_t k = 1000;
};
using PoolPolicy = std::variant<AllUniquePool, TopKPool>;

struct BoltzmannSelection {
    TemperatureSchedule schedule;
    PoolPolicy pool;
};
struct TournamentSelection {
    std::size_t arity = 3;
};
struct GreedySelection {
    std::size_t k = 10;
};
using SelectionPolicy = std::variant<BoltzmannSelection, TournamentSelection, GreedySelection>;

/// Normalized Boltzmann weights exp(-(f - f_min) / T); +inf objectives get 0.
inline std::vector<double> boltzmann_weights(std::span<const double> f, double temperature) {
    detail::require(temperature > 0.0, "boltzmann: temperature must be positive");
    detail::require(!f.empty(), "boltzmann: empty pool");
    const double f_min = *std::min_element(f.begin(), f.end());
    detail::require(std::isfinite(f_min), "boltzmann: no finite objective in pool");
    std::vector<double> w(f.size());
    double total = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        w[i] = std::isfinite(f[i]) ? std::exp(-(f[i] - f_min) / temperature) : 0.0;
        total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
}

/// n iid draws (with replacement) of pool indices with probability
/// proportional to exp(-f / T).
inline std::vector<std::size_t> boltzmann_select(std::span<const double> f, std::size_t n, double temperature,
                                                 Rng& rng) {
    const auto w = boltzmann_weights(f, temperature);
    std::vector<double> cdf(w.size());
    std::partial_sum(w.begin(), w.end(), cdf.begin());
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * cdf.back();
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
        while (w[idx] == 0.0 && idx > 0) --idx;
        out.push_back(idx);
    }
    return out;
}

/// Indices of the bank entries forming a Boltzmann pool.
inline std::vector<std::size_t> pool_indices(const SolutionBank& bank, const PoolPolicy& pool) {
    if (const auto* top = std::get_if<TopKPool>(&pool)) return bank.top_k(top->k);
    std::vector<std::size_t> idx(bank.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

inline std::vector<BitString> boltzmann_select(const SolutionBank& bank, std::size_t n, double temperature,
                                               const PoolPolicy& pool, Rng& rng) {
    const auto idx = pool_indices(bank, pool);
    detail::require(!idx.empty(), "boltzmann_select: empty pool");
    std::vector<double> f;
    f.reserve(idx.size());
    for (auto i : idx) f.push_back(bank[i].f);
    std::vector<BitString> out;
    out.reserve(n);
    for (auto k : boltzmann_select(std::span<const double>(f), n, temperature, rng)) out.push_back(bank[idx[k]].x);
    return out;
}

/// Each output is the best of `arity` uniform draws with replacement; ties
/// among the drawn contestants are broken uniformly.
inline std::vector<std::size_t> tournament_select(std::span<const double> f, std::size_t n, std::size_t arity,
                                                  Rng& rng) {
    detail::require(!f.empty(), "tournament_select: empty population");
    detail::require(arity >= 1, "tournament_select: arity must be >= 1");
    std::vector<std::size_t> out;
    out.reserve(n);
    std::vector<std::size_t> winners;
    for (std::size_t i = 0; i < n; ++i) {
        winners.clear();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < arity; ++a) {
            const std::size_t c = rng.below(f.size());
            if (winners.empty() || f[c] < best) {
                best = f[c];
                winners.assign(1, c);
            } else if (f[c] == best) {
                winners.push_back(c);
            }
        }
        out.push_back(winners.size() == 1 ? winners[0] : winners[rng.below(winners.size())]);
    }
    return out;
}

/// Indices of the k best samples, ties by position; k > |samples| returns all.
inline std::vector<std::size_t> greedy_select(std::span<const double> f, std::size_t k) {
    std::vector<std::size_t> idx(f.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&f](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

// ---------------------------------------------------------------- variation

/// Flips every bit independently with probability p_flip.
inline BitString mutate(BitString x, double p_flip, Rng& rng) {
    detail::require(p_flip >= 0.0 && p_flip <= 1.0, "mutate: p_flip outside [0, 1]");
    if (p_flip == 0.0) return x;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (p_flip == 1.0 || rng.uniform() < p_flip) x.flip(i);
    return x;
}

/// Children exchange the segment [cut_lo, cut_hi) of their parents.
inline std::pair<BitString, BitString> two_point_crossover(const BitString& a, const BitString& b, std::size_t cut_lo,
                                                           std::size_t cut_hi) {
    detail::require(a.size() == b.size(), "two_point_crossover: parent lengths differ");
    detail::require(cut_lo <= cut_hi && cut_hi <= a.size(), "two_point_crossover: bad cut points");
    BitString c1 = a, c2 = b;
    for (std::size_t i = cut_lo; i < cut_hi; ++i) {
        c1.set(i, b[i] == 1);
        c2.set(i, a[i] == 1);
    }
    return {std::move(c1), std::move(c2)};
}

/// Cut points drawn uniformly from {0..N} and sorted.
inline std::pair<BitString, BitString> two_point_crossover(const BitString& a, const BitString& b, Rng& rng) {
    detail::require(a.size() == b.size(), "two_point_crossover: parent lengths differ");
    std::size_t i = rng.below(a.size() + 1), j = rng.below(a.size() + 1);
    if (i > j) std::swap(i, j);
    return two_point_crossover(a, b, i, j);
}

} // namespace tneda
