#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"
#include "tneda/mps.hpp"
#include "tneda/rng.hpp"

namespace tneda {

/// Hyperparameters shared by the Born-machine and positive-MPS trainers.
/// One sweep is a pass down the chain of adjacent pairs and back up again.
struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t sweeps = 1;
    std::size_t chi_max = 5;
    double svd_cutoff = 1e-6;
    bool fresh_init = true;
    std::size_t grad_steps_per_pair = 1;

    void validate() const {
        detail::require(learning_rate >= 0.0 && std::isfinite(learning_rate), "TrainConfig: learning_rate must be >= 0");
        detail::require(sweeps >= 1, "TrainConfig: sweeps must be >= 1");
        detail::require(chi_max >= 1, "TrainConfig: chi_max must be >= 1");
        detail::require(svd_cutoff >= 0.0, "TrainConfig: svd_cutoff must be >= 0");
        detail::require(grad_steps_per_pair >= 1, "TrainConfig: grad_steps_per_pair must be >= 1");
    }
};

/// Mean negative log-likelihood -(1/|data|) sum log p(x).
template <typename Model>
double negative_log_likelihood(const Model& model, std::span<const BitString> data) {
    detail::require(!data.empty(), "negative_log_likelihood: empty data");
    double acc = 0.0;
    for (const auto& x : data) acc -= model.log_probability(x);
    return acc / static_cast<double>(data.size());
}

inline double negative_log_likelihood(const Mps& m, std::span<const BitString> data) {
    return negative_log_likelihood(MpsDistribution(m), data);
}

namespace detail {

struct WeightedData {
    std::vector<BitString> strings;
    std::vector<double> weights; // multiplicity / |data|
};

inline WeightedData deduplicate(std::span<const BitString> data, std::size_t n) {
    require(!data.empty(), "training: empty data");
    std::map<BitString, std::size_t> counts;
    for (const auto& x : data) {
        require(x.size() == n, "training: bit string length " + std::to_string(x.size()) + " differs from " +
                                   std::to_string(n));
        ++counts[x];
    }
    WeightedData out;
    for (auto& [x, c] : counts) {
        out.strings.push_back(x);
        out.weights.push_back(static_cast<double>(c) / static_cast<double>(data.size()));
    }
    return out;
}

inline double normalize_in_place(double* v, std::size_t len) {
    double m = 0.0;
    for (std::size_t i = 0; i < len; ++i) m = std::max(m, std::abs(v[i]));
    if (m == 0.0) return -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) v[i] /= m;
    return std::log(m);
}

// Everything outside the pair (k, k+1) that the pair objective depends on.
// Left/right per-sample vectors are stored flat (sample-major) and rescaled
// per sample; the log of the removed scale is kept so values stay exact.
//
// Amplitude mode: env_left/env_right are the (l x l) and (r x r) norm environments.
// Direct-positive mode: they are the length-l and length-r vectors obtained by
// summing over the physical index of every site outside the pair.
struct PairContext {
    Encoding mode = Encoding::Amplitude;
    std::size_t l = 1, r = 1;
    const WeightedData* data = nullptr;
    std::size_t site = 0;
    std::vector<double> left_vecs, right_vecs;
    std::vector<double> left_logs, right_logs;
    std::vector<double> env_left, env_right;
    double env_log = 0.0;
};

// Amplitude: log Z. Direct-positive: log Z.
inline double pair_log_z(const PairContext& c, const TwoSiteTensor& th) {
    const std::size_t l = c.l, r = c.r;
    double z = 0.0;
    if (c.mode == Encoding::Amplitude) {
        std::vector<double> tmp(l * r);
        for (std::size_t s1 = 0; s1 < 2; ++s1)
            for (std::size_t s2 = 0; s2 < 2; ++s2) {
                // tmp = L * theta_s * R
                std::fill(tmp.begin(), tmp.end(), 0.0);
                for (std::size_t a = 0; a < l; ++a)
                    for (std::size_t a2 = 0; a2 < l; ++a2) {
                        const double e = c.env_left[a * l + a2];
                        if (e == 0.0) continue;
                        for (std::size_t b = 0; b < r; ++b) tmp[a * r + b] += e * th(a2, s1, s2, b);
                    }
                for (std::size_t a = 0; a < l; ++a)
                    for (std::size_t b = 0; b < r; ++b) {
                        double row = 0.0;
                        for (std::size_t b2 = 0; b2 < r; ++b2) row += tmp[a * r + b2] * c.env_right[b2 * r + b];
                        z += th(a, s1, s2, b) * row;
                    }
            }
    } else {
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t s1 = 0; s1 < 2; ++s1)
                for (std::size_t s2 = 0; s2 < 2; ++s2)
                    for (std::size_t b = 0; b < r; ++b) z += c.env_left[a] * th(a, s1, s2, b) * c.env_right[b];
    }
    if (!(z > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::log(z) + c.env_log;
}

// Unnormalized pair contraction for sample d: psi_d (amplitude) or T(x_d) (direct).
inline double pair_value(const PairContext& c, const TwoSiteTensor& th, std::size_t d) {
    const auto& x = c.data->strings[d];
    const std::size_t s1 = x[c.site], s2 = x[c.site + 1];
    const double* lv = &c.left_vecs[d * c.l];
    const double* rv = &c.right_vecs[d * c.r];
    double acc = 0.0;
    for (std::size_t a = 0; a < c.l; ++a) {
        if (lv[a] == 0.0) continue;
        double row = 0.0;
        for (std::size_t b = 0; b < c.r; ++b) row += th(a, s1, s2, b) * rv[b];
        acc += lv[a] * row;
    }
    return acc;
}

// Mean NLL of the data as a function of the merged tensor.
inline double pair_nll(const PairContext& c, const TwoSiteTensor& th) {
    const double log_z = pair_log_z(c, th);
    double nll = log_z;
    const auto& w = c.data->weights;
    for (std::size_t d = 0; d < w.size(); ++d) {
        const double v = pair_value(c, th, d);
        const double scale = c.left_logs[d] + c.right_logs[d];
        double lp;
        if (c.mode == Encoding::Amplitude)
            lp = 2.0 * (std::log(std::abs(v)) + scale);
        else
            lp = v > 0.0 ? std::log(v) + scale : -std::numeric_limits<double>::infinity();
        nll -= w[d] * lp;
    }
    return nll;
}

// Gradient of pair_nll with respect to every entry of the merged tensor.
// Samples whose contraction is exactly zero are skipped (their NLL term is infinite).
inline TwoSiteTensor pair_nll_gradient(const PairContext& c, const TwoSiteTensor& th) {
    const std::size_t l = c.l, r = c.r;
    TwoSiteTensor g(l, r);
    const double z_scaled = std::exp(pair_log_z(c, th) - c.env_log);
    if (c.mode == Encoding::Amplitude) {
        // dZ/dtheta = 2 L theta R
        std::vector<double> tmp(l * r);
        for (std::size_t s1 = 0; s1 < 2; ++s1)
            for (std::size_t s2 = 0; s2 < 2; ++s2) {
                std::fill(tmp.begin(), tmp.end(), 0.0);
                for (std::size_t a = 0; a < l; ++a)
                    for (std::size_t a2 = 0; a2 < l; ++a2) {
                        const double e = c.env_left[a * l + a2];
                        if (e == 0.0) continue;
                        for (std::size_t b = 0; b < r; ++b) tmp[a * r + b] += e * th(a2, s1, s2, b);
                    }
                for (std::size_t a = 0; a < l; ++a)
                    for (std::size_t b = 0; b < r; ++b) {
                        double acc = 0.0;
                        for (std::size_t b2 = 0; b2 < r; ++b2) acc += tmp[a * r + b2] * c.env_right[b2 * r + b];
                        g(a, s1, s2, b) = 2.0 * acc / z_scaled;
                    }
            }
    } else {
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t s1 = 0; s1 < 2; ++s1)
                for (std::size_t s2 = 0; s2 < 2; ++s2)
                    for (std::size_t b = 0; b < r; ++b) g(a, s1, s2, b) = c.env_left[a] * c.env_right[b] / z_scaled;
    }
    const double data_factor = c.mode == Encoding::Amplitude ? 2.0 : 1.0;
    const auto& w = c.data->weights;
    for (std::size_t d = 0; d < w.size(); ++d) {
        const double v = pair_value(c, th, d);
        if (v == 0.0) continue;
        const auto& x = c.data->strings[d];
        const std::size_t s1 = x[c.site], s2 = x[c.site + 1];
        const double coef = data_factor * w[d] / v;
        const double* lv = &c.left_vecs[d * l];
        const double* rv = &c.right_vecs[d * r];
        for (std::size_t a = 0; a < l; ++a) {
            if (lv[a] == 0.0) continue;
            for (std::size_t b = 0; b < r; ++b) g(a, s1, s2, b) -= coef * lv[a] * rv[b];
        }
    }
    return g;
}

// Per-sample boundary vectors and norm environments of an MPS, kept up to date
// while a sweep moves the active pair.
class SweepCaches {
public:
    SweepCaches(const std::vector<Tensor3>& tensors, Encoding mode, const WeightedData& data)
        : mode_(mode), data_(&data), n_(tensors.size()) {
        const std::size_t nd = data.strings.size();
        left_vecs_.assign(n_ + 1, {});
        right_vecs_.assign(n_ + 1, {});
        left_logs_.assign(n_ + 1, std::vector<double>(nd, 0.0));
        right_logs_.assign(n_ + 1, std::vector<double>(nd, 0.0));
        left_env_.assign(n_ + 1, {});
        right_env_.assign(n_ + 1, {});
        left_env_log_.assign(n_ + 1, 0.0);
        right_env_log_.assign(n_ + 1, 0.0);
        left_vecs_[0].assign(nd, 1.0);
        right_vecs_[n_].assign(nd, 1.0);
        left_env_[0] = {1.0};
        right_env_[n_] = {1.0};
        for (std::size_t b = 0; b < n_; ++b) extend_left(tensors, b);
        for (std::size_t b = n_; b-- > 1;) extend_right(tensors, b);
    }

    // Recompute the left quantities at bond b+1 from bond b and site b.
    void extend_left(const std::vector<Tensor3>& tensors, std::size_t b) {
        const Tensor3& t = tensors[b];
        const std::size_t l = t.left(), r = t.right(), nd = data_->strings.size();
        auto& out = left_vecs_[b + 1];
        out.assign(nd * r, 0.0);
        const auto& in = left_vecs_[b];
        for (std::size_t d = 0; d < nd; ++d) {
            const std::size_t s = data_->strings[d][b];
            for (std::size_t a = 0; a < l; ++a) {
                const double va = in[d * l + a];
                if (va == 0.0) continue;
                for (std::size_t c = 0; c < r; ++c) out[d * r + c] += va * t(a, s, c);
            }
            left_logs_[b + 1][d] = left_logs_[b][d] + normalize_in_place(&out[d * r], r);
        }
        if (mode_ == Encoding::Amplitude) {
            left_env_[b + 1] = grow_left_env(left_env_[b], t);
        } else {
            auto& env = left_env_[b + 1];
            env.assign(r, 0.0);
            for (std::size_t a = 0; a < l; ++a)
                for (std::size_t s = 0; s < 2; ++s)
                    for (std::size_t c = 0; c < r; ++c) env[c] += left_env_[b][a] * t(a, s, c);
        }
        left_env_log_[b + 1] = left_env_log_[b] + normalize_in_place(left_env_[b + 1].data(), left_env_[b + 1].size());
    }

    // Recompute the right quantities at bond b from bond b+1 and site b.
    void extend_right(const std::vector<Tensor3>& tensors, std::size_t b) {
        const Tensor3& t = tensors[b];
        const std::size_t l = t.left(), r = t.right(), nd = data_->strings.size();
        auto& out = right_vecs_[b];
        out.assign(nd * l, 0.0);
        const auto& in = right_vecs_[b + 1];
        for (std::size_t d = 0; d < nd; ++d) {
            const std::size_t s = data_->strings[d][b];
            for (std::size_t a = 0; a < l; ++a) {
                double acc = 0.0;
                for (std::size_t c = 0; c < r; ++c) acc += t(a, s, c) * in[d * r + c];
                out[d * l + a] = acc;
            }
            right_logs_[b][d] = right_logs_[b + 1][d] + normalize_in_place(&out[d * l], l);
        }
        if (mode_ == Encoding::Amplitude)
            right_env_[b] = grow_right_env(right_env_[b + 1], t);
        else
            right_env_[b] = grow_right_vec(right_env_[b + 1], t);
        right_env_log_[b] = right_env_log_[b + 1] + normalize_in_place(right_env_[b].data(), right_env_[b].size());
    }

    PairContext pair(const std::vector<Tensor3>& tensors, std::size_t k) const {
        PairContext c;
        c.mode = mode_;
        c.l = tensors[k].left();
        c.r = tensors[k + 1].right();
        c.data = data_;
        c.site = k;
        c.left_vecs = left_vecs_[k];
        c.right_vecs = right_vecs_[k + 2];
        c.left_logs = left_logs_[k];
        c.right_logs = right_logs_[k + 2];
        c.env_left = left_env_[k];
        c.env_right = right_env_[k + 2];
        c.env_log = left_env_log_[k] + right_env_log_[k + 2];
        return c;
    }

private:
    Encoding mode_;
    const WeightedData* data_;
    std::size_t n_;
    std::vector<std::vector<double>> left_vecs_, right_vecs_;
    std::vector<std::vector<double>> left_logs_, right_logs_;
    std::vector<std::vector<double>> left_env_, right_env_;
    std::vector<double> left_env_log_, right_env_log_;
};

// Bring an amplitude network into right-canonical form with unit norm.
inline void right_canonicalize(std::vector<Tensor3>& tensors) {
    for (std::size_t i = tensors.size(); i-- > 1;) {
        Tensor3& t = tensors[i];
        const std::size_t l = t.left(), r = t.right();
        Eigen::MatrixXd mat(l, 2 * r);
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t b = 0; b < r; ++b) mat(a, s * r + b) = t(a, s, b);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto k = static_cast<std::size_t>(svd.singularValues().size());
        Tensor3 vt(k, r);
        for (std::size_t c = 0; c < k; ++c)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t b = 0; b < r; ++b) vt(c, s, b) = svd.matrixV()(s * r + b, c);
        Eigen::MatrixXd us = svd.matrixU() * svd.singularValues().asDiagonal();
        Tensor3& prev = tensors[i - 1];
        Tensor3 np(prev.left(), k);
        for (std::size_t a = 0; a < prev.left(); ++a)
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t c = 0; c < k; ++c) {
                    double acc = 0.0;
                    for (std::size_t m = 0; m < l; ++m) acc += prev(a, s, m) * us(m, c);
                    np(a, s, c) = acc;
                }
        t = std::move(vt);
        prev = std::move(np);
    }
    double norm = 0.0;
    for (double v : tensors[0].data()) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& v : tensors[0].data()) v /= norm;
}

inline void axpy(TwoSiteTensor& th, double alpha, const TwoSiteTensor& g) {
    for (std::size_t i = 0; i < th.data().size(); ++i) th.data()[i] += alpha * g.data()[i];
}

// Single-site networks have no pair to merge; train the lone 2-vector directly.
inline Tensor3 train_single_site(Tensor3 t, const WeightedData& data, const TrainConfig& cfg, Encoding mode) {
    double count[2] = {0.0, 0.0};
    for (std::size_t d = 0; d < data.strings.size(); ++d) count[data.strings[d][0]] += data.weights[d];
    const std::size_t steps = cfg.sweeps * cfg.grad_steps_per_pair;
    for (std::size_t step = 0; step < steps; ++step) {
        const double a0 = t(0, 0, 0), a1 = t(0, 1, 0);
        double g[2];
        if (mode == Encoding::Amplitude) {
            const double z = a0 * a0 + a1 * a1;
            g[0] = 2.0 * a0 / z - (a0 != 0.0 ? 2.0 * count[0] / a0 : 0.0);
            g[1] = 2.0 * a1 / z - (a1 != 0.0 ? 2.0 * count[1] / a1 : 0.0);
        } else {
            const double z = a0 + a1;
            g[0] = 1.0 / z - (a0 > 0.0 ? count[0] / a0 : 0.0);
            g[1] = 1.0 / z - (a1 > 0.0 ? count[1] / a1 : 0.0);
        }
        for (std::size_t s = 0; s < 2; ++s) {
            double v = t(0, s, 0) - cfg.learning_rate * g[s];
            if (mode == Encoding::DirectPositive) v = std::max(v, 0.0);
            t(0, s, 0) = v;
        }
        if (mode == Encoding::Amplitude) {
            const double norm = std::hypot(t(0, 0, 0), t(0, 1, 0));
            if (norm > 0.0)
                for (double& v : t.data()) v /= norm;
        }
    }
    return t;
}

} // namespace detail

/// NLL of a data set as a function of the merged tensor at sites (site, site+1),
/// with every other tensor held fixed. Exposes the exact objective and its
/// analytic gradient that the two-site trainers step along.
class TwoSiteNll {
public:
    TwoSiteNll(const Mps& m, std::size_t site, std::span<const BitString> data)
        : mode_(m.mode()), data_(detail::deduplicate(data, m.size())) {
        detail::require(m.mode() != Encoding::Linear, "TwoSiteNll: linear-mode networks are not trainable");
        detail::require(site + 1 < m.size(), "TwoSiteNll: pair index out of range");
        context_ = detail::SweepCaches(m.tensors(), mode_, data_).pair(m.tensors(), site);
        theta_ = merge(m[site], m[site + 1]);
    }

    TwoSiteNll(const TwoSiteNll&) = delete;
    TwoSiteNll& operator=(const TwoSiteNll&) = delete;

    const TwoSiteTensor& theta() const noexcept { return theta_; }
    double value(const TwoSiteTensor& theta) const { return detail::pair_nll(context_, theta); }
    TwoSiteTensor gradient(const TwoSiteTensor& theta) const { return detail::pair_nll_gradient(context_, theta); }

private:
    Encoding mode_;
    detail::WeightedData data_;
    detail::PairContext context_;
    TwoSiteTensor theta_;
};

/// Born machine training by two-site sweeps: at every adjacent pair the two
/// tensors are merged, stepped along -grad NLL, renormalized to Z = 1 and split
/// back by truncated SVD. The network is right-canonicalized first, so the
/// forward pass leaves left-canonical tensors behind it and the backward pass
/// right-canonical ones.
inline Mps train_born_machine(std::span<const BitString> data, const TrainConfig& cfg, const std::optional<Mps>& init,
                              Rng& rng) {
    cfg.validate();
    detail::require(!data.empty(), "train_born_machine: empty data");
    const std::size_t n = data.front().size();
    detail::require(n >= 1, "train_born_machine: zero-length bit strings");
    const auto wdata = detail::deduplicate(data, n);

    std::vector<Tensor3> tensors;
    if (cfg.fresh_init || !init) {
        tensors = random_init(n, cfg.chi_max, Encoding::Amplitude, rng).tensors();
    } else {
        detail::require(init->mode() == Encoding::Amplitude, "train_born_machine: init must be amplitude mode");
        detail::require(init->size() == n, "train_born_machine: init size differs from data length");
        detail::require(init->max_bond() <= cfg.chi_max, "train_born_machine: init exceeds chi_max");
        tensors = init->tensors();
    }

    if (n == 1) {
        tensors[0] = detail::train_single_site(tensors[0], wdata, cfg, Encoding::Amplitude);
        return Mps(std::move(tensors), Encoding::Amplitude, cfg.chi_max);
    }

    detail::right_canonicalize(tensors);
    detail::SweepCaches caches(tensors, Encoding::Amplitude, wdata);

    auto update_pair = [&](std::size_t k, Absorb absorb) {
        auto ctx = caches.pair(tensors, k);
        TwoSiteTensor theta = merge(tensors[k], tensors[k + 1]);
        for (std::size_t step = 0; step < cfg.grad_steps_per_pair; ++step)
            detail::axpy(theta, -cfg.learning_rate, detail::pair_nll_gradient(ctx, theta));
        const double log_z = detail::pair_log_z(ctx, theta);
        if (std::isfinite(log_z)) {
            const double scale = std::exp(-0.5 * (log_z - ctx.env_log));
            for (double& v : theta.data()) v *= scale;
        }
        auto split = canonicalize_split(theta, cfg.chi_max, cfg.svd_cutoff, absorb);
        tensors[k] = std::move(split.left);
        tensors[k + 1] = std::move(split.right);
    };

    for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            update_pair(k, Absorb::Right);
            caches.extend_left(tensors, k);
        }
        for (std::size_t k = n - 1; k-- > 0;) {
            update_pair(k, Absorb::Left);
            caches.extend_right(tensors, k + 1);
        }
    }
    return Mps(std::move(tensors), Encoding::Amplitude, cfg.chi_max);
}

inline Mps train_born_machine(std::span<const BitString> data, const TrainConfig& cfg, Rng& rng) {
    return train_born_machine(data, cfg, std::nullopt, rng);
}

/// Incremental update of a direct-positive network by gradient ascent on the
/// log-likelihood of `data`. Pairs are visited as in a two-site sweep; the
/// gradient with respect to the merged tensor is pulled back to both site
/// tensors, which are stepped together and projected onto entries >= 0. Bond
/// dimensions never change.
inline Mps train_positive_mps(std::span<const BitString> data, const TrainConfig& cfg, const Mps& init) {
    cfg.validate();
    detail::require(init.mode() == Encoding::DirectPositive, "train_positive_mps: init must be direct-positive");
    detail::require(!data.empty(), "train_positive_mps: empty data");
    const std::size_t n = init.size();
    const auto wdata = detail::deduplicate(data, n);
    std::vector<Tensor3> tensors = init.tensors();

    if (n == 1) {
        tensors[0] = detail::train_single_site(tensors[0], wdata, cfg, Encoding::DirectPositive);
        return Mps(std::move(tensors), Encoding::DirectPositive, init.chi_max());
    }

    detail::SweepCaches caches(tensors, Encoding::DirectPositive, wdata);
    auto update_pair = [&](std::size_t k) {
        auto ctx = caches.pair(tensors, k);
        Tensor3& a = tensors[k];
        Tensor3& b = tensors[k + 1];
        for (std::size_t step = 0; step < cfg.grad_steps_per_pair; ++step) {
            const TwoSiteTensor g = detail::pair_nll_gradient(ctx, merge(a, b));
            Tensor3 ga(a.left(), a.right()), gb(b.left(), b.right());
            for (std::size_t l = 0; l < a.left(); ++l)
                for (std::size_t s1 = 0; s1 < 2; ++s1)
                    for (std::size_t m = 0; m < a.right(); ++m)
                        for (std::size_t s2 = 0; s2 < 2; ++s2)
                            for (std::size_t r = 0; r < b.right(); ++r) {
                                ga(l, s1, m) += g(l, s1, s2, r) * b(m, s2, r);
                                gb(m, s2, r) += a(l, s1, m) * g(l, s1, s2, r);
                            }
            Tensor3 na = a, nb = b;
            for (std::size_t i = 0; i < na.data().size(); ++i)
                na.data()[i] = std::max(0.0, na.data()[i] - cfg.learning_rate * ga.data()[i]);
            for (std::size_t i = 0; i < nb.data().size(); ++i)
                nb.data()[i] = std::max(0.0, nb.data()[i] - cfg.learning_rate * gb.data()[i]);
            // A step that wipes out all mass is rejected.
            const double log_z = detail::pair_log_z(ctx, merge(na, nb));
            if (!std::isfinite(log_z)) break;
            // Rescale so the contraction with the fixed environments is 1; the
            // distribution is unchanged and entry magnitudes stay bounded.
            const double scale = std::exp(-0.5 * (log_z - ctx.env_log));
            for (double& v : na.data()) v *= scale;
            for (double& v : nb.data()) v *= scale;
            a = std::move(na);
            b = std::move(nb);
        }
    };

    for (std::size_t sweep = 0; sweep < cfg.sweeps; ++sweep) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            update_pair(k);
            caches.extend_left(tensors, k);
        }
        for (std::size_t k = n - 1; k-- > 0;) {
            update_pair(k);
            caches.extend_right(tensors, k + 1);
        }
    }
    return Mps(std::move(tensors), Encoding::DirectPositive, init.chi_max());
}

} // namespace tneda
