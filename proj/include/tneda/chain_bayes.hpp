#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"
#include "tneda/mps.hpp"
#include "tneda/rng.hpp"

namespace tneda {

/// Markov chain over bits in natural order: p(x) = p(x_1) prod p(x_{i+1} | x_i).
///
/// `conditionals[i][parent][child]` is p(x_{i+2} = child | x_{i+1} = parent)
/// (0-based: the table linking sites i and i+1), so each parent row sums to 1.
struct ChainBayes {
    using Table = std::array<std::array<double, 2>, 2>;

    std::array<double, 2> p_first{0.5, 0.5};
    std::vector<Table> conditionals;
    double smoothing = 1.0;

    std::size_t size() const noexcept { return conditionals.size() + 1; }

    double log_probability(const BitString& x) const {
        detail::require(x.size() == size(), "chain_bayes_probability: length mismatch");
        double lp = std::log(p_first[x[0]]);
        for (std::size_t i = 0; i + 1 < x.size(); ++i) lp += std::log(conditionals[i][x[i]][x[i + 1]]);
        return lp;
    }

    double probability(const BitString& x) const { return std::exp(log_probability(x)); }
};

/// Smoothed maximum-likelihood fit. With smoothing s, every probability is
/// (count + s) / (total + 2 s); s = 0 is the exact MLE. A parent value that
/// never occurs (with s = 0) gets a uniform row.
inline ChainBayes fit_chain_bayes(std::span<const BitString> data, double smoothing = 1.0) {
    detail::require(!data.empty(), "fit_chain_bayes: empty data");
    detail::require(smoothing >= 0.0, "fit_chain_bayes: negative smoothing");
    const std::size_t n = data.front().size();
    detail::require(n >= 1, "fit_chain_bayes: zero-length bit strings");

    std::array<double, 2> first{0.0, 0.0};
    std::vector<ChainBayes::Table> pair_counts(n - 1, ChainBayes::Table{});
    for (const auto& x : data) {
        detail::require(x.size() == n, "fit_chain_bayes: inconsistent bit string lengths");
        first[x[0]] += 1.0;
        for (std::size_t i = 0; i + 1 < n; ++i) pair_counts[i][x[i]][x[i + 1]] += 1.0;
    }

    auto normalize = [smoothing](double c0, double c1) -> std::array<double, 2> {
        const double total = c0 + c1 + 2.0 * smoothing;
        if (total == 0.0) return {0.5, 0.5};
        return {(c0 + smoothing) / total, (c1 + smoothing) / total};
    };

    ChainBayes b;
    b.smoothing = smoothing;
    b.p_first = normalize(first[0], first[1]);
    b.conditionals.reserve(n - 1);
    for (const auto& counts : pair_counts) {
        ChainBayes::Table t;
        for (std::size_t parent = 0; parent < 2; ++parent) t[parent] = normalize(counts[parent][0], counts[parent][1]);
        b.conditionals.push_back(t);
    }
    return b;
}

/// Ancestral sample along the chain.
inline BitString sample_chain_bayes(const ChainBayes& b, Rng& rng) {
    BitString x(b.size());
    std::size_t prev = rng.uniform() < b.p_first[0] ? 0 : 1;
    x.set(0, prev == 1);
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        prev = rng.uniform() < b.conditionals[i][prev][0] ? 0 : 1;
        x.set(i + 1, prev == 1);
    }
    return x;
}

inline double chain_bayes_probability(const ChainBayes& b, const BitString& x) { return b.probability(x); }

/// The same distribution as a direct-positive MPS of bond dimension 2; the bond
/// carries a copy of the previous bit.
inline Mps to_mps(const ChainBayes& b) {
    const std::size_t n = b.size();
    std::vector<Tensor3> tensors;
    tensors.reserve(n);
    if (n == 1) {
        Tensor3 t(1, 1);
        t(0, 0, 0) = b.p_first[0];
        t(0, 1, 0) = b.p_first[1];
        tensors.push_back(t);
        return Mps(std::move(tensors), Encoding::DirectPositive, 2);
    }
    Tensor3 first(1, 2);
    for (std::size_t s = 0; s < 2; ++s) first(0, s, s) = b.p_first[s];
    tensors.push_back(first);
    for (std::size_t i = 1; i < n; ++i) {
        const bool last = i + 1 == n;
        Tensor3 t(2, last ? 1 : 2);
        for (std::size_t parent = 0; parent < 2; ++parent)
            for (std::size_t s = 0; s < 2; ++s) t(parent, s, last ? 0 : s) = b.conditionals[i - 1][parent][s];
        tensors.push_back(std::move(t));
    }
    return Mps(std::move(tensors), Encoding::DirectPositive, 2);
}

// Text table: "chain_bayes <N> <smoothing>", "first p0 p1", then N-1 lines
// "p(0|0) p(1|0) p(0|1) p(1|1)".
inline void write_chain_bayes(std::ostream& os, const ChainBayes& b) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "chain_bayes " << b.size() << ' ' << b.smoothing << '\n';
    buf << "first " << b.p_first[0] << ' ' << b.p_first[1] << '\n';
    for (const auto& t : b.conditionals) buf << t[0][0] << ' ' << t[0][1] << ' ' << t[1][0] << ' ' << t[1][1] << '\n';
    os << buf.str();
}

inline ChainBayes read_chain_bayes(std::istream& is) {
    std::string tag;
    std::size_t n = 0;
    ChainBayes b;
    if (!(is >> tag >> n >> b.smoothing) || tag != "chain_bayes" || n == 0) throw ParseError("chain_bayes: bad header");
    if (!(is >> tag >> b.p_first[0] >> b.p_first[1]) || tag != "first") throw ParseError("chain_bayes: bad 'first' line");
    b.conditionals.resize(n - 1);
    for (auto& t : b.conditionals)
        if (!(is >> t[0][0] >> t[0][1] >> t[1][0] >> t[1][1])) throw ParseError("chain_bayes: truncated table");
    auto row_ok = [](const std::array<double, 2>& row) {
        return row[0] >= 0.0 && row[1] >= 0.0 && std::abs(row[0] + row[1] - 1.0) <= 1e-9;
    };
    if (!row_ok(b.p_first)) throw ParseError("chain_bayes: 'first' row is not a distribution");
    for (std::size_t i = 0; i < b.conditionals.size(); ++i)
        for (const auto& row : b.conditionals[i])
            if (!row_ok(row)) throw ParseError("chain_bayes: table " + std::to_string(i) + " has a row that is not a distribution");
    return b;
}

} // namespace tneda
