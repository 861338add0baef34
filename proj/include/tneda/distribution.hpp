#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"

namespace tneda {

/// Explicit distribution over a finite set of distinct bit strings.
class FiniteDistribution {
public:
    FiniteDistribution() = default;

    /// Takes (string, probability) pairs with distinct strings; probabilities must be >= 0 and sum to 1 within 1e-9.
    explicit FiniteDistribution(std::vector<std::pair<BitString, double>> entries) : entries_(std::move(entries)) {
        double total = 0.0;
        std::unordered_set<BitString, BitStringHash> seen;
        for (const auto& [x, p] : entries_) {
            detail::require(p >= 0.0, "FiniteDistribution: negative probability");
            detail::require(seen.insert(x).second, "FiniteDistribution: duplicate string " + x.to_string());
            total += p;
        }
        detail::require(!entries_.empty(), "FiniteDistribution: empty support");
        detail::require(std::abs(total - 1.0) <= 1e-9, "FiniteDistribution: probabilities do not sum to 1");
    }

    const std::vector<std::pair<BitString, double>>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Shannon entropy in nats.
    double entropy() const {
        double h = 0.0;
        for (const auto& [x, p] : entries_)
            if (p > 0.0) h -= p * std::log(p);
        return h;
    }

private:
    std::vector<std::pair<BitString, double>> entries_;
};

/// KL(target || model). When the model assigns zero probability to
/// `zero_support` points of positive target mass the divergence is infinite;
/// the count is kept so that medians over runs stay meaningful.
struct KlValue {
    double value = 0.0;
    std::size_t zero_support = 0;

    bool finite() const noexcept { return zero_support == 0; }
};

/// KL(target || model) = sum_x t(x) log(t(x) / q(x)) over the target support.
/// `log_prob` maps a bit string to the model's log-probability.
template <typename LogProb>
KlValue kl_divergence(const FiniteDistribution& target, LogProb&& log_prob) {
    KlValue out;
    double acc = 0.0;
    for (const auto& [x, t] : target.entries()) {
        if (t <= 0.0) continue;
        const double lq = log_prob(x);
        if (lq == -std::numeric_limits<double>::infinity()) {
            ++out.zero_support;
            continue;
        }
        acc += t * (std::log(t) - lq);
    }
    out.value = out.zero_support ? std::numeric_limits<double>::infinity() : std::max(acc, 0.0);
    return out;
}

/// KL(target || model) for any model exposing `log_probability(const BitString&)`.
template <typename Model>
KlValue model_kl_vs_target(const Model& model, const FiniteDistribution& target) {
    return kl_divergence(target, [&model](const BitString& x) { return model.log_probability(x); });
}

} // namespace tneda
