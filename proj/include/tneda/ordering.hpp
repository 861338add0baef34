#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "tneda/error.hpp"

namespace tneda {

/// arccos(corr) / pi. Overshoot of |corr| up to 1e-9 is clamped.
inline double correlation_distance(double corr) {
    detail::require(std::abs(corr) <= 1.0 + 1e-9, "correlation_distance: |corr| > 1");
    return std::acos(std::clamp(corr, -1.0, 1.0)) / std::numbers::pi;
}

inline Eigen::MatrixXd correlation_distance_matrix(const Eigen::MatrixXd& corr) {
    Eigen::MatrixXd d(corr.rows(), corr.cols());
    for (Eigen::Index i = 0; i < corr.rows(); ++i)
        for (Eigen::Index j = 0; j < corr.cols(); ++j) d(i, j) = i == j ? 0.0 : correlation_distance(corr(i, j));
    return d;
}

/// Agglomerative tree in the usual linkage-matrix layout: leaves are nodes
/// 0..N-1 and merge k creates node N+k.
struct LinkageTree {
    struct Merge {
        std::size_t left;
        std::size_t right;
        double height;
        std::size_t size;
    };

    std::size_t n_leaves = 0;
    std::vector<Merge> merges;

    std::size_t root() const noexcept { return n_leaves == 1 ? 0 : n_leaves + merges.size() - 1; }
    bool is_leaf(std::size_t node) const noexcept { return node < n_leaves; }
    const Merge& merge_of(std::size_t node) const { return merges[node - n_leaves]; }
};

/// Ward linkage on a precomputed distance matrix via the Lance-Williams update
///   d(ij, k) = sqrt(((n_i + n_k) d(i,k)^2 + (n_j + n_k) d(j,k)^2 - n_k d(i,j)^2) / (n_i + n_j + n_k)).
/// Ties go to the pair with the lowest (row, column) position among active clusters.
inline LinkageTree ward_linkage(const Eigen::MatrixXd& dist) {
    const auto n = static_cast<std::size_t>(dist.rows());
    detail::require(n >= 1 && dist.rows() == dist.cols(), "ward_linkage: distance matrix must be square and nonempty");
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(dist(i, i) == 0.0, "ward_linkage: nonzero diagonal");
        for (std::size_t j = 0; j < n; ++j) {
            detail::require(std::isfinite(dist(i, j)) && dist(i, j) >= 0.0, "ward_linkage: negative or non-finite distance");
            detail::require(std::abs(dist(i, j) - dist(j, i)) <= 1e-12 * std::max(1.0, std::abs(dist(i, j))),
                            "ward_linkage: asymmetric distance matrix");
        }
    }

    LinkageTree tree;
    tree.n_leaves = n;
    Eigen::MatrixXd d = dist;
    std::vector<std::size_t> node(n), size(n, 1);
    std::vector<bool> active(n, true);
    for (std::size_t i = 0; i < n; ++i) node[i] = i;

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j)
                if (active[j] && d(i, j) < best) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
        }
        const double ni = static_cast<double>(size[bi]), nj = static_cast<double>(size[bj]);
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == bi || k == bj) continue;
            const double nk = static_cast<double>(size[k]);
            const double sq = ((ni + nk) * d(bi, k) * d(bi, k) + (nj + nk) * d(bj, k) * d(bj, k) - nk * best * best) /
                              (ni + nj + nk);
            d(bi, k) = d(k, bi) = std::sqrt(std::max(sq, 0.0));
        }
        tree.merges.push_back({node[bi], node[bj], best, size[bi] + size[bj]});
        node[bi] = n + step;
        size[bi] += size[bj];
        active[bj] = false;
    }
    return tree;
}

namespace detail {

inline void collect_leaves(const LinkageTree& tree, std::size_t node, const std::vector<bool>& flipped,
                           std::vector<std::size_t>& out) {
    if (tree.is_leaf(node)) {
        out.push_back(node);
        return;
    }
    const auto& m = tree.merge_of(node);
    const bool f = flipped[node - tree.n_leaves];
    collect_leaves(tree, f ? m.right : m.left, flipped, out);
    collect_leaves(tree, f ? m.left : m.right, flipped, out);
}

inline double adjacent_distance_sum(const std::vector<std::size_t>& order, const Eigen::MatrixXd& dist) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) s += dist(order[i], order[i + 1]);
    return s;
}

} // namespace detail

/// Left-to-right leaf traversal with no orientation changes.
inline std::vector<std::size_t> tree_traversal_order(const LinkageTree& tree) {
    std::vector<std::size_t> out;
    detail::collect_leaves(tree, tree.root(), std::vector<bool>(tree.merges.size(), false), out);
    return out;
}

/// Leaf order keeping every cluster contiguous. Starting from the plain
/// traversal, each internal node (bottom-up, repeated until stable) swaps its
/// two children whenever that strictly lowers the sum of distances between
/// neighbouring leaves.
inline std::vector<std::size_t> leaf_order(const LinkageTree& tree, const Eigen::MatrixXd& dist) {
    std::vector<bool> flipped(tree.merges.size(), false);
    std::vector<std::size_t> order;
    detail::collect_leaves(tree, tree.root(), flipped, order);
    double current = detail::adjacent_distance_sum(order, dist);
    for (std::size_t pass = 0; pass <= tree.merges.size(); ++pass) {
        bool improved = false;
        for (std::size_t k = 0; k < tree.merges.size(); ++k) {
            flipped[k] = !flipped[k];
            std::vector<std::size_t> trial;
            trial.reserve(tree.n_leaves);
            detail::collect_leaves(tree, tree.root(), flipped, trial);
            const double s = detail::adjacent_distance_sum(trial, dist);
            if (s < current - 1e-15) {
                current = s;
                order = std::move(trial);
                improved = true;
            } else {
                flipped[k] = !flipped[k];
            }
        }
        if (!improved) break;
    }
    return order;
}

/// Ordering of assets from their covariance: arccos-correlation distances,
/// Ward linkage, then leaf_order.
inline std::vector<std::size_t> ward_order_from_covariance(const Eigen::MatrixXd& sigma) {
    Eigen::MatrixXd corr(sigma.rows(), sigma.cols());
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
            const double denom = std::sqrt(std::max(sigma(i, i), 0.0) * std::max(sigma(j, j), 0.0));
            corr(i, j) = i == j ? 1.0 : (denom > 0.0 ? std::clamp(sigma(i, j) / denom, -1.0, 1.0) : 0.0);
        }
    const Eigen::MatrixXd dist = correlation_distance_matrix(corr);
    return leaf_order(ward_linkage(dist), dist);
}

} // namespace tneda
