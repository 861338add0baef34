#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"
#include "tneda/rng.hpp"

namespace tneda {

/// How the value of the network maps to a probability.
///
/// Amplitude: p(x) = psi(x)^2 / Z (real Born machine).
/// DirectPositive: p(x) = T(x) / Z with every entry >= 0.
/// Linear: p(x) = T(x) / Z with signed entries whose contraction is still
///   nonnegative, e.g. the squared network of a Born machine after diffusion.
enum class Encoding { Amplitude, DirectPositive, Linear };

inline std::string to_string(Encoding e) {
    switch (e) {
    case Encoding::Amplitude: return "amplitude";
    case Encoding::DirectPositive: return "direct_positive";
    case Encoding::Linear: return "linear";
    }
    return "?";
}

inline Encoding encoding_from_string(const std::string& s) {
    if (s == "amplitude") return Encoding::Amplitude;
    if (s == "direct_positive") return Encoding::DirectPositive;
    if (s == "linear") return Encoding::Linear;
    throw ParseError("unknown encoding '" + s + "'");
}

/// Order-3 site tensor with shape (left, 2, right), stored row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t left, std::size_t right, double fill = 0.0)
        : left_(left), right_(right), data_(left * 2 * right, fill) {}

    std::size_t left() const noexcept { return left_; }
    std::size_t right() const noexcept { return right_; }

    double& operator()(std::size_t a, std::size_t s, std::size_t b) noexcept { return data_[(a * 2 + s) * right_ + b]; }
    double operator()(std::size_t a, std::size_t s, std::size_t b) const noexcept {
        return data_[(a * 2 + s) * right_ + b];
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t left_ = 0;
    std::size_t right_ = 0;
    std::vector<double> data_;
};

/// Merged two-site tensor with shape (left, 2, 2, right).
class TwoSiteTensor {
public:
    TwoSiteTensor() = default;
    TwoSiteTensor(std::size_t left, std::size_t right, double fill = 0.0)
        : left_(left), right_(right), data_(left * 4 * right, fill) {}

    std::size_t left() const noexcept { return left_; }
    std::size_t right() const noexcept { return right_; }

    double& operator()(std::size_t a, std::size_t s1, std::size_t s2, std::size_t b) noexcept {
        return data_[((a * 2 + s1) * 2 + s2) * right_ + b];
    }
    double operator()(std::size_t a, std::size_t s1, std::size_t s2, std::size_t b) const noexcept {
        return data_[((a * 2 + s1) * 2 + s2) * right_ + b];
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t left_ = 0;
    std::size_t right_ = 0;
    std::vector<double> data_;
};

inline TwoSiteTensor merge(const Tensor3& a, const Tensor3& b) {
    detail::require(a.right() == b.left(), "merge: bond dimensions disagree");
    TwoSiteTensor theta(a.left(), b.right());
    for (std::size_t l = 0; l < a.left(); ++l)
        for (std::size_t s1 = 0; s1 < 2; ++s1)
            for (std::size_t m = 0; m < a.right(); ++m) {
                const double av = a(l, s1, m);
                if (av == 0.0) continue;
                for (std::size_t s2 = 0; s2 < 2; ++s2)
                    for (std::size_t r = 0; r < b.right(); ++r) theta(l, s1, s2, r) += av * b(m, s2, r);
            }
    return theta;
}

/// Matrix product state over binary variables.
///
/// Invariants (checked on construction): at least one site, boundary bonds of
/// dimension 1, adjacent bonds agree, every bond <= chi_max, and nonnegative
/// entries in DirectPositive mode.
class Mps {
public:
    Mps(std::vector<Tensor3> tensors, Encoding mode, std::size_t chi_max)
        : tensors_(std::move(tensors)), mode_(mode), chi_max_(chi_max) {
        validate();
    }

    std::size_t size() const noexcept { return tensors_.size(); }
    Encoding mode() const noexcept { return mode_; }
    std::size_t chi_max() const noexcept { return chi_max_; }

    const Tensor3& operator[](std::size_t i) const noexcept { return tensors_[i]; }
    const std::vector<Tensor3>& tensors() const noexcept { return tensors_; }

    /// Bond dimensions chi_0 .. chi_N (chi_0 = chi_N = 1).
    std::vector<std::size_t> bond_dims() const {
        std::vector<std::size_t> dims;
        dims.reserve(size() + 1);
        dims.push_back(tensors_.front().left());
        for (const auto& t : tensors_) dims.push_back(t.right());
        return dims;
    }

    std::size_t max_bond() const {
        std::size_t m = 1;
        for (const auto& t : tensors_) m = std::max(m, t.right());
        return m;
    }

    friend bool operator==(const Mps&, const Mps&) = default;

private:
    void validate() const {
        detail::require(!tensors_.empty(), "Mps: at least one site required");
        detail::require(chi_max_ >= 1, "Mps: chi_max must be positive");
        detail::require(tensors_.front().left() == 1 && tensors_.back().right() == 1,
                        "Mps: boundary bond dimensions must be 1");
        for (std::size_t i = 0; i < tensors_.size(); ++i) {
            const auto& t = tensors_[i];
            detail::require(t.left() >= 1 && t.right() >= 1, "Mps: zero bond dimension");
            detail::require(t.left() <= chi_max_ && t.right() <= chi_max_, "Mps: bond dimension exceeds chi_max");
            if (i + 1 < tensors_.size())
                detail::require(t.right() == tensors_[i + 1].left(),
                                "Mps: bond mismatch between sites " + std::to_string(i) + " and " +
                                    std::to_string(i + 1));
            if (mode_ == Encoding::DirectPositive)
                for (double v : t.data()) detail::require(v >= 0.0, "Mps: negative entry in direct-positive mode");
        }
    }

    std::vector<Tensor3> tensors_;
    Encoding mode_;
    std::size_t chi_max_;
};

namespace detail {

// Largest bond dimension supported by a chain of n binary sites at bond b.
inline std::size_t max_useful_bond(std::size_t n_sites, std::size_t bond, std::size_t chi) {
    auto cap = [chi](std::size_t k) { return k >= 63 ? chi : std::min<std::size_t>(chi, std::size_t{1} << k); };
    return std::min(cap(bond), cap(n_sites - bond));
}

// Rescale v in place so its largest magnitude is 1; returns the log of the factor removed.
inline double renormalize(std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    if (m == 0.0) return -std::numeric_limits<double>::infinity();
    for (double& x : v) x /= m;
    return std::log(m);
}

// out = v * A_s (row vector times a physical slice).
inline void row_times_slice(const std::vector<double>& v, const Tensor3& t, std::size_t s, std::vector<double>& out) {
    out.assign(t.right(), 0.0);
    for (std::size_t a = 0; a < t.left(); ++a) {
        const double va = v[a];
        if (va == 0.0) continue;
        const double* row = &t.data()[(a * 2 + s) * t.right()];
        for (std::size_t b = 0; b < t.right(); ++b) out[b] += va * row[b];
    }
}

// E' = sum_s A_s^T E A_s for a left environment E (left x left, row-major).
inline std::vector<double> grow_left_env(const std::vector<double>& env, const Tensor3& t) {
    const std::size_t l = t.left(), r = t.right();
    std::vector<double> out(r * r, 0.0), tmp(l * r);
    for (std::size_t s = 0; s < 2; ++s) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t a2 = 0; a2 < l; ++a2) {
                const double e = env[a * l + a2];
                if (e == 0.0) continue;
                for (std::size_t b = 0; b < r; ++b) tmp[a * r + b] += e * t(a2, s, b);
            }
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t b = 0; b < r; ++b) {
                const double av = t(a, s, b);
                if (av == 0.0) continue;
                for (std::size_t b2 = 0; b2 < r; ++b2) out[b * r + b2] += av * tmp[a * r + b2];
            }
    }
    return out;
}

// E' = sum_s A_s E A_s^T for a right environment E (right x right, row-major).
inline std::vector<double> grow_right_env(const std::vector<double>& env, const Tensor3& t) {
    const std::size_t l = t.left(), r = t.right();
    std::vector<double> out(l * l, 0.0), tmp(l * r);
    for (std::size_t s = 0; s < 2; ++s) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t b = 0; b < r; ++b) {
                const double av = t(a, s, b);
                if (av == 0.0) continue;
                for (std::size_t b2 = 0; b2 < r; ++b2) tmp[a * r + b2] += av * env[b * r + b2];
            }
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t a2 = 0; a2 < l; ++a2) {
                double acc = 0.0;
                for (std::size_t b2 = 0; b2 < r; ++b2) acc += tmp[a * r + b2] * t(a2, s, b2);
                out[a * l + a2] += acc;
            }
    }
    return out;
}

// v' = (A_0 + A_1) v for a right vector v of length `right`.
inline std::vector<double> grow_right_vec(const std::vector<double>& v, const Tensor3& t) {
    std::vector<double> out(t.left(), 0.0);
    for (std::size_t a = 0; a < t.left(); ++a)
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t b = 0; b < t.right(); ++b) out[a] += t(a, s, b) * v[b];
    return out;
}

} // namespace detail

/// Random network with bonds min(chi, 2^b, 2^(N-b)). Amplitude entries are iid
/// uniform on [-1, 1]; direct-positive (and linear) entries iid uniform on (0, 1].
inline Mps random_init(std::size_t n_sites, std::size_t chi, Encoding mode, Rng& rng) {
    detail::require(n_sites >= 1, "random_init: zero sites");
    detail::require(chi >= 1, "random_init: zero bond dimension");
    std::vector<Tensor3> tensors;
    tensors.reserve(n_sites);
    for (std::size_t i = 0; i < n_sites; ++i) {
        Tensor3 t(detail::max_useful_bond(n_sites, i, chi), detail::max_useful_bond(n_sites, i + 1, chi));
        for (double& v : t.data()) v = mode == Encoding::Amplitude ? rng.uniform(-1.0, 1.0) : 1.0 - rng.uniform();
        tensors.push_back(std::move(t));
    }
    return Mps(std::move(tensors), mode, chi);
}

inline Mps random_init(std::size_t n_sites, std::size_t chi, Encoding mode, std::uint64_t seed) {
    Rng rng(seed);
    return random_init(n_sites, chi, mode, rng);
}

/// log Z by sequential contraction in O(N chi^3), renormalizing at every site.
/// Throws DomainError when Z <= 0 (unnormalizable network).
inline double log_partition_function(const Mps& m) {
    double log_scale = 0.0;
    double value = 0.0;
    if (m.mode() == Encoding::Amplitude) {
        std::vector<double> env{1.0};
        for (const auto& t : m.tensors()) {
            env = detail::grow_left_env(env, t);
            log_scale += detail::renormalize(env);
            if (!std::isfinite(log_scale)) break;
        }
        value = env[0];
    } else {
        std::vector<double> v{1.0}, next;
        for (const auto& t : m.tensors()) {
            next.assign(t.right(), 0.0);
            for (std::size_t a = 0; a < t.left(); ++a)
                for (std::size_t s = 0; s < 2; ++s)
                    for (std::size_t b = 0; b < t.right(); ++b) next[b] += v[a] * t(a, s, b);
            v.swap(next);
            log_scale += detail::renormalize(v);
            if (!std::isfinite(log_scale)) break;
        }
        value = v[0];
    }
    if (!std::isfinite(log_scale) || !(value > 0.0)) throw DomainError("partition function is not positive");
    return log_scale + std::log(value);
}

inline double partition_function(const Mps& m) { return std::exp(log_partition_function(m)); }

/// log of the unnormalized network value for x: log psi(x)^2 in amplitude mode,
/// log T(x) otherwise; -inf when the value is zero (or negative in linear mode).
inline double log_unnormalized(const Mps& m, const BitString& x) {
    detail::require(x.size() == m.size(), "probability: bit string length " + std::to_string(x.size()) +
                                              " does not match network size " + std::to_string(m.size()));
    std::vector<double> v{1.0}, next;
    double log_scale = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        detail::row_times_slice(v, m[i], x[i], next);
        v.swap(next);
        log_scale += detail::renormalize(v);
        if (!std::isfinite(log_scale)) return -std::numeric_limits<double>::infinity();
    }
    if (m.mode() == Encoding::Amplitude) return 2.0 * (log_scale + std::log(std::abs(v[0])));
    if (!(v[0] > 0.0)) return -std::numeric_limits<double>::infinity();
    return log_scale + std::log(v[0]);
}

/// Normalized model with Z precomputed; use this when evaluating many strings.
class MpsDistribution {
public:
    explicit MpsDistribution(Mps m) : mps_(std::move(m)), log_z_(log_partition_function(mps_)) {}

    const Mps& mps() const noexcept { return mps_; }
    std::size_t size() const noexcept { return mps_.size(); }
    double log_partition() const noexcept { return log_z_; }

    double log_probability(const BitString& x) const { return log_unnormalized(mps_, x) - log_z_; }
    double probability(const BitString& x) const { return std::exp(log_probability(x)); }

private:
    Mps mps_;
    double log_z_;
};

inline double log_probability(const Mps& m, const BitString& x) {
    return log_unnormalized(m, x) - log_partition_function(m);
}

inline double probability(const Mps& m, const BitString& x) { return std::exp(log_probability(m, x)); }

/// Exact ancestral sampler. Right environments are contracted once; each draw
/// then walks left to right choosing x_i from its exact conditional marginal.
class MpsSampler {
public:
    explicit MpsSampler(const Mps& m) : mps_(m) {
        const std::size_t n = m.size();
        right_.resize(n + 1);
        right_[n] = {1.0};
        for (std::size_t i = n; i-- > 0;) {
            if (m.mode() == Encoding::Amplitude)
                right_[i] = detail::grow_right_env(right_[i + 1], m[i]);
            else
                right_[i] = detail::grow_right_vec(right_[i + 1], m[i]);
            const double lg = detail::renormalize(right_[i]);
            if (!std::isfinite(lg)) throw DomainError("sampler: degenerate network (Z = 0)");
        }
        if (!(right_[0][0] > 0.0)) throw DomainError("sampler: degenerate network (Z <= 0)");
    }

    BitString sample(Rng& rng) const {
        const std::size_t n = mps_.size();
        BitString x(n);
        std::vector<double> v{1.0}, w[2];
        for (std::size_t i = 0; i < n; ++i) {
            const auto& t = mps_[i];
            double weight[2];
            for (std::size_t s = 0; s < 2; ++s) {
                detail::row_times_slice(v, t, s, w[s]);
                weight[s] = marginal_weight(w[s], right_[i + 1], t.right());
            }
            const double total = weight[0] + weight[1];
            if (!(total > 0.0)) throw DomainError("sampler: zero conditional mass");
            const std::size_t s = rng.uniform() * total < weight[0] ? 0 : 1;
            x.set(i, s == 1);
            v.swap(w[s]);
            detail::renormalize(v);
        }
        return x;
    }

private:
    double marginal_weight(const std::vector<double>& w, const std::vector<double>& right, std::size_t r) const {
        double acc = 0.0;
        if (mps_.mode() == Encoding::Amplitude) {
            for (std::size_t b = 0; b < r; ++b) {
                double row = 0.0;
                for (std::size_t b2 = 0; b2 < r; ++b2) row += right[b * r + b2] * w[b2];
                acc += w[b] * row;
            }
        } else {
            for (std::size_t b = 0; b < r; ++b) acc += w[b] * right[b];
        }
        return std::max(acc, 0.0);
    }

    Mps mps_;
    std::vector<std::vector<double>> right_;
};

inline BitString perfect_sample(const Mps& m, Rng& rng) { return MpsSampler(m).sample(rng); }

/// Probability-space network of a Born machine: each site becomes A_s (x) A_s,
/// giving a linear-mode network of bond dimension chi^2 with the same distribution.
inline Mps squared_network(const Mps& m) {
    if (m.mode() != Encoding::Amplitude) return m;
    std::vector<Tensor3> out;
    out.reserve(m.size());
    for (const auto& t : m.tensors()) {
        const std::size_t l = t.left(), r = t.right();
        Tensor3 sq(l * l, r * r);
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t a2 = 0; a2 < l; ++a2)
                for (std::size_t s = 0; s < 2; ++s)
                    for (std::size_t b = 0; b < r; ++b)
                        for (std::size_t b2 = 0; b2 < r; ++b2) sq(a * l + a2, s, b * r + b2) = t(a, s, b) * t(a2, s, b2);
        out.push_back(std::move(sq));
    }
    return Mps(std::move(out), Encoding::Linear, m.chi_max() * m.chi_max());
}

/// Network of the model followed by independent bit flips with probability
/// p_flip: every physical leg is contracted with D = [[1-p, p], [p, 1-p]].
inline Mps apply_diffusion(const Mps& m, double p_flip) {
    detail::require(p_flip >= 0.0 && p_flip <= 1.0, "apply_diffusion: p_flip outside [0, 1]");
    Mps base = squared_network(m);
    std::vector<Tensor3> out;
    out.reserve(base.size());
    const double keep = 1.0 - p_flip;
    for (const auto& t : base.tensors()) {
        Tensor3 d(t.left(), t.right());
        for (std::size_t a = 0; a < t.left(); ++a)
            for (std::size_t b = 0; b < t.right(); ++b) {
                const double y0 = t(a, 0, b), y1 = t(a, 1, b);
                d(a, 0, b) = keep * y0 + p_flip * y1;
                d(a, 1, b) = p_flip * y0 + keep * y1;
            }
        out.push_back(std::move(d));
    }
    return Mps(std::move(out), base.mode(), base.chi_max());
}

/// Adds iid N(0, alpha_noise^2) to every entry; direct-positive entries are clamped at 0.
inline Mps add_tensor_noise(const Mps& m, double alpha_noise, Rng& rng) {
    detail::require(alpha_noise >= 0.0, "add_tensor_noise: negative standard deviation");
    if (alpha_noise == 0.0) return m;
    std::vector<Tensor3> out = m.tensors();
    for (auto& t : out)
        for (double& v : t.data()) {
            v += alpha_noise * rng.normal();
            if (m.mode() == Encoding::DirectPositive && v < 0.0) v = 0.0;
        }
    return Mps(std::move(out), m.mode(), m.chi_max());
}

/// Which side of a split receives the singular values.
enum class Absorb { Left, Right };

struct SplitResult {
    Tensor3 left;
    Tensor3 right;
    std::vector<double> singular_values; ///< retained, descending
    double discarded_weight = 0.0;       ///< Frobenius norm of the dropped singular values
};

/// SVD split of a merged two-site tensor. Singular values with
/// sigma_k / sigma_max < cutoff are dropped and at most chi_max are kept.
inline SplitResult canonicalize_split(const TwoSiteTensor& theta, std::size_t chi_max, double cutoff,
                                      Absorb absorb = Absorb::Right) {
    detail::require(chi_max >= 1, "canonicalize_split: chi_max must be positive");
    detail::require(cutoff >= 0.0, "canonicalize_split: negative cutoff");
    const std::size_t l = theta.left(), r = theta.right();
    Eigen::MatrixXd mat(2 * l, 2 * r);
    for (std::size_t a = 0; a < l; ++a)
        for (std::size_t s1 = 0; s1 < 2; ++s1)
            for (std::size_t s2 = 0; s2 < 2; ++s2)
                for (std::size_t b = 0; b < r; ++b) mat(a * 2 + s1, s2 * r + b) = theta(a, s1, s2, b);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sigma = svd.singularValues();
    detail::require(sigma.size() > 0 && sigma(0) > 0.0, "canonicalize_split: all-zero two-site tensor");

    std::size_t keep = 0;
    while (keep < static_cast<std::size_t>(sigma.size()) && keep < chi_max && sigma(keep) >= cutoff * sigma(0)) ++keep;
    keep = std::max<std::size_t>(keep, 1);

    SplitResult out;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) {
        if (static_cast<std::size_t>(k) < keep)
            out.singular_values.push_back(sigma(k));
        else
            out.discarded_weight += sigma(k) * sigma(k);
    }
    out.discarded_weight = std::sqrt(out.discarded_weight);

    const auto& u = svd.matrixU();
    const auto& v = svd.matrixV();
    out.left = Tensor3(l, keep);
    out.right = Tensor3(keep, r);
    for (std::size_t k = 0; k < keep; ++k) {
        const double wl = absorb == Absorb::Left ? sigma(k) : 1.0;
        const double wr = absorb == Absorb::Right ? sigma(k) : 1.0;
        for (std::size_t a = 0; a < l; ++a)
            for (std::size_t s = 0; s < 2; ++s) out.left(a, s, k) = wl * u(a * 2 + s, k);
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t b = 0; b < r; ++b) out.right(k, s, b) = wr * v(s * r + b, k);
    }
    return out;
}

// Text dump: header "tneda-mps 1", then "sites N mode M chi_max K", "bonds chi_0 ... chi_N",
// then one line per tensor with its row-major (left, 2, right) entries.
inline void write_mps(std::ostream& os, const Mps& m) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "tneda-mps 1\n";
    buf << "sites " << m.size() << " mode " << to_string(m.mode()) << " chi_max " << m.chi_max() << "\n";
    buf << "bonds";
    for (auto d : m.bond_dims()) buf << ' ' << d;
    buf << '\n';
    for (const auto& t : m.tensors()) {
        for (std::size_t k = 0; k < t.data().size(); ++k) buf << (k ? " " : "") << t.data()[k];
        buf << '\n';
    }
    os << buf.str();
}

inline Mps read_mps(std::istream& is) {
    std::string tag, key;
    int version = 0;
    if (!(is >> tag >> version) || tag != "tneda-mps" || version != 1) throw ParseError("mps: bad header");
    std::size_t n = 0, chi_max = 0;
    std::string mode;
    if (!(is >> key) || key != "sites" || !(is >> n)) throw ParseError("mps: expected 'sites'");
    if (!(is >> key) || key != "mode" || !(is >> mode)) throw ParseError("mps: expected 'mode'");
    if (!(is >> key) || key != "chi_max" || !(is >> chi_max)) throw ParseError("mps: expected 'chi_max'");
    if (!(is >> key) || key != "bonds") throw ParseError("mps: expected 'bonds'");
    if (n == 0) throw ParseError("mps: zero sites");
    std::vector<std::size_t> dims(n + 1);
    for (auto& d : dims)
        if (!(is >> d)) throw ParseError("mps: truncated bond list");
    std::vector<Tensor3> tensors;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor3 t(dims[i], dims[i + 1]);
        for (double& v : t.data())
            if (!(is >> v)) throw ParseError("mps: truncated entries for site " + std::to_string(i));
        tensors.push_back(std::move(t));
    }
    try {
        return Mps(std::move(tensors), encoding_from_string(mode), chi_max);
    } catch (const DomainError& e) {
        throw ParseError(std::string("mps: ") + e.what());
    }
}

} // namespace tneda
