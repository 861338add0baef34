#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tneda/bit_string.hpp"
#include "tneda/error.hpp"
#include "tneda/rng.hpp"

// All objectives are minimized. Maximization problems (knapsack value, OneMax,
// trap) are negated at the problem boundary.
namespace tneda {

/// Type-erased objective f: {0,1}^N -> R u {+inf}. Evaluation is pure and
/// may be called concurrently.
class Problem {
public:
    Problem(std::string name, std::size_t dimension, std::function<double(const BitString&)> objective,
            std::optional<double> optimum = std::nullopt)
        : name_(std::move(name)), dimension_(dimension), objective_(std::move(objective)), optimum_(optimum) {
        detail::require(dimension_ >= 1, "Problem: dimension must be positive");
    }

    const std::string& name() const noexcept { return name_; }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::optional<double>& optimum() const noexcept { return optimum_; }
    void set_optimum(std::optional<double> f) { optimum_ = f; }

    double operator()(const BitString& x) const {
        detail::require(x.size() == dimension_, name_ + ": expected " + std::to_string(dimension_) + " bits, got " +
                                                    std::to_string(x.size()));
        return objective_(x);
    }

private:
    std::string name_;
    std::size_t dimension_;
    std::function<double(const BitString&)> objective_;
    std::optional<double> optimum_;
};

/// (f - f*) / |f*|, or the plain gap f - f* when f* = 0.
inline double relative_error(double f, double optimum) {
    return optimum != 0.0 ? (f - optimum) / std::abs(optimum) : f - optimum;
}

// ---------------------------------------------------------------- portfolio

/// Equal-weighted minimum-variance portfolio with soft cardinality bounds.
struct PortfolioProblem {
    Eigen::MatrixXd sigma;
    std::size_t n_min = 0;
    std::size_t n_max = 0;
    double penalty_c = 100.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(sigma.rows()); }

    void validate() const {
        detail::require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "PortfolioProblem: sigma must be square");
        detail::require((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-9, "PortfolioProblem: sigma not symmetric");
        detail::require(n_min <= n_max && n_max <= size(), "PortfolioProblem: need n_min <= n_max <= N");
        detail::require(penalty_c > 0.0, "PortfolioProblem: penalty must be positive");
    }
};

/// x^T Sigma x / |x|^2 inside [n_min, n_max]; C (|x| - n_max) above and
/// C (n_min - |x|) below. An empty portfolio admitted by n_min = 0 scores +inf.
inline double portfolio_objective(const PortfolioProblem& p, const BitString& x) {
    detail::require(x.size() == p.size(), "portfolio_objective: length mismatch");
    const std::size_t k = x.count();
    if (k > p.n_max) return p.penalty_c * static_cast<double>(k - p.n_max);
    if (k < p.n_min) return p.penalty_c * static_cast<double>(p.n_min - k);
    if (k == 0) return std::numeric_limits<double>::infinity();
    std::vector<Eigen::Index> on;
    on.reserve(k);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i]) on.push_back(static_cast<Eigen::Index>(i));
    double q = 0.0;
    for (auto i : on)
        for (auto j : on) q += p.sigma(i, j);
    return q / (static_cast<double>(k) * static_cast<double>(k));
}

inline Problem make_problem(PortfolioProblem p) {
    p.validate();
    const std::size_t n = p.size();
    auto shared = std::make_shared<const PortfolioProblem>(std::move(p));
    return Problem("portfolio", n, [shared](const BitString& x) { return portfolio_objective(*shared, x); });
}

/// Pearson correlation matrix of a covariance matrix.
inline Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& sigma) {
    const Eigen::VectorXd sd = sigma.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd corr(sigma.rows(), sigma.cols());
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) {
            const double d = sd(i) * sd(j);
            corr(i, j) = i == j ? 1.0 : (d > 0.0 ? std::clamp(sigma(i, j) / d, -1.0, 1.0) : 0.0);
        }
    return corr;
}

/// Sample covariance (divisor T-1) of a T x N returns table.
inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& returns) {
    detail::require(returns.rows() >= 2, "sample_covariance: need at least two observations");
    const Eigen::RowVectorXd mean = returns.colwise().mean();
    const Eigen::MatrixXd centered = returns.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(returns.rows() - 1);
}

/// Synthetic instance: returns from a one-factor market model with
/// heterogeneous betas plus sector blocks, then their sample covariance.
inline PortfolioProblem random_portfolio(std::size_t n, std::size_t n_min, std::size_t n_max, std::uint64_t seed,
                                         double penalty_c = 100.0) {
    detail::require(n >= 1, "random_portfolio: zero assets");
    Rng rng(seed);
    const std::size_t t = std::max<std::size_t>(4 * n, 50);
    const std::size_t sectors = std::max<std::size_t>(1, n / 8);
    std::vector<double> beta(n), sector_beta(n), idio(n);
    std::vector<std::size_t> sector(n);
    for (std::size_t i = 0; i < n; ++i) {
        beta[i] = rng.uniform(0.3, 1.5);
        sector[i] = rng.below(sectors);
        sector_beta[i] = rng.uniform(0.2, 1.0);
        idio[i] = rng.uniform(0.5, 2.0);
    }
    Eigen::MatrixXd returns(t, n);
    for (std::size_t row = 0; row < t; ++row) {
        const double market = rng.normal();
        std::vector<double> sector_move(sectors);
        for (auto& s : sector_move) s = rng.normal();
        for (std::size_t i = 0; i < n; ++i)
            returns(row, i) =
                0.01 * (beta[i] * market + sector_beta[i] * sector_move[sector[i]] + idio[i] * rng.normal());
    }
    PortfolioProblem p;
    p.sigma = sample_covariance(returns);
    p.sigma = 0.5 * (p.sigma + p.sigma.transpose()).eval();
    p.n_min = n_min;
    p.n_max = n_max;
    p.penalty_c = penalty_c;
    p.validate();
    return p;
}

enum class CsvMode { Covariance, Returns };

/// Reads a square covariance matrix or a T x N returns table from CSV text.
/// Blank lines are skipped. Covariance input is symmetrized by averaging with
/// its transpose; entries that disagree by more than 1e-6 are rejected.
inline Eigen::MatrixXd load_covariance_csv(std::string_view text, CsvMode mode = CsvMode::Covariance,
                                           bool has_header = false) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t start = 0;
    bool header_pending = has_header;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            if (end == text.size()) break;
            continue;
        }
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::vector<double> row;
        std::size_t cell_start = 0;
        while (true) {
            const std::size_t comma = line.find(',', cell_start);
            std::string_view cell = line.substr(cell_start, comma == std::string_view::npos ? line.npos : comma - cell_start);
            while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
            while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError("csv line " + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) + "'");
            row.push_back(v);
            if (comma == std::string_view::npos) break;
            cell_start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("csv line " + std::to_string(line_no) + ": ragged row (" + std::to_string(row.size()) +
                             " cells, expected " + std::to_string(rows.front().size()) + ")");
        rows.push_back(std::move(row));
        if (end == text.size()) break;
    }
    if (rows.empty()) throw ParseError("csv: no data rows");

    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];

    if (mode == CsvMode::Returns) return sample_covariance(m);

    if (m.rows() != m.cols())
        throw ParseError("csv: covariance matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-6) throw ParseError("csv: covariance matrix asymmetric (max difference " + std::to_string(asym) + ")");
    return 0.5 * (m + m.transpose());
}

// ---------------------------------------------------------------- knapsack

struct KnapsackProblem {
    std::vector<std::int64_t> values;
    std::vector<std::int64_t> weights;
    std::int64_t capacity = 0;

    std::size_t size() const noexcept { return values.size(); }

    void validate() const {
        detail::require(!values.empty() && values.size() == weights.size(), "KnapsackProblem: values/weights mismatch");
        detail::require(capacity > 0, "KnapsackProblem: capacity must be positive");
        for (std::size_t i = 0; i < values.size(); ++i)
            detail::require(values[i] > 0 && weights[i] > 0, "KnapsackProblem: values and weights must be positive");
    }

    /// Multiplier on the overweight amount; exceeds the total value, so any
    /// infeasible selection scores above every feasible one.
    double penalty_per_unit() const {
        std::int64_t total = 0;
        for (auto v : values) total += v;
        return 1.0 + static_cast<double>(total);
    }
};

/// -(total value) if feasible, else (weight - capacity) * (1 + sum of values).
inline double knapsack_objective(const KnapsackProblem& k, const BitString& x) {
    detail::require(x.size() == k.size(), "knapsack_objective: length mismatch");
    std::int64_t value = 0, weight = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i]) {
            value += k.values[i];
            weight += k.weights[i];
        }
    if (weight <= k.capacity) return -static_cast<double>(value);
    return static_cast<double>(weight - k.capacity) * k.penalty_per_unit();
}

inline Problem make_problem(KnapsackProblem k) {
    k.validate();
    const std::size_t n = k.size();
    auto shared = std::make_shared<const KnapsackProblem>(std::move(k));
    return Problem("knapsack", n, [shared](const BitString& x) { return knapsack_objective(*shared, x); });
}

/// Instance text: "<N> <capacity>" then N lines "<value> <weight>".
inline KnapsackProblem parse_knapsack(std::string_view text) {
    std::istringstream is{std::string(text)};
    KnapsackProblem k;
    std::size_t n = 0;
    if (!(is >> n >> k.capacity)) throw ParseError("knapsack: expected '<N> <capacity>' header");
    k.values.resize(n);
    k.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(is >> k.values[i] >> k.weights[i]))
            throw ParseError("knapsack: item " + std::to_string(i + 1) + " of " + std::to_string(n) + " missing");
    std::string extra;
    if (is >> extra) throw ParseError("knapsack: trailing data '" + extra + "'");
    try {
        k.validate();
    } catch (const DomainError& e) {
        throw ParseError(std::string("knapsack: ") + e.what());
    }
    return k;
}

inline std::string serialize_knapsack(const KnapsackProblem& k) {
    std::ostringstream os;
    os << k.size() << ' ' << k.capacity << '\n';
    for (std::size_t i = 0; i < k.size(); ++i) os << k.values[i] << ' ' << k.weights[i] << '\n';
    return os.str();
}

/// Seeded instance with values and weights uniform on [1, 100] and capacity
/// half the total weight.
inline KnapsackProblem random_knapsack(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    KnapsackProblem k;
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        k.values.push_back(1 + static_cast<std::int64_t>(rng.below(100)));
        k.weights.push_back(1 + static_cast<std::int64_t>(rng.below(100)));
        total += k.weights.back();
    }
    k.capacity = std::max<std::int64_t>(1, total / 2);
    k.validate();
    return k;
}

/// Exact optimum by dynamic programming over capacity; returns the minimizing
/// selection and its objective (-best value).
inline std::pair<BitString, double> knapsack_dp_optimum(const KnapsackProblem& k) {
    k.validate();
    const std::size_t n = k.size();
    const auto cap = static_cast<std::size_t>(k.capacity);
    detail::require((n + 1) * (cap + 1) <= 200'000'000, "knapsack_dp_optimum: table of (N+1) x (capacity+1) too large");
    std::vector<std::vector<std::int64_t>> best(n + 1, std::vector<std::int64_t>(cap + 1, 0));
    for (std::size_t i = 1; i <= n; ++i) {
        const auto w = static_cast<std::size_t>(k.weights[i - 1]);
        for (std::size_t c = 0; c <= cap; ++c) {
            best[i][c] = best[i - 1][c];
            if (w <= c) best[i][c] = std::max(best[i][c], best[i - 1][c - w] + k.values[i - 1]);
        }
    }
    BitString x(n);
    std::size_t c = cap;
    for (std::size_t i = n; i >= 1; --i)
        if (best[i][c] != best[i - 1][c]) {
            x.set(i - 1, true);
            c -= static_cast<std::size_t>(k.weights[i - 1]);
        }
    return {x, -static_cast<double>(best[n][cap])};
}

// ---------------------------------------------------------------- max-sat

struct MaxSatProblem {
    std::size_t n_vars = 0;
    std::vector<std::vector<int>> clauses;
    /// Number of clauses that do not have exactly three literals (general CNF is tolerated).
    std::size_t non_three_literal = 0;

    bool is_three_sat() const noexcept { return non_three_literal == 0; }
};

/// Number of clauses with every literal false.
inline double maxsat_objective(const MaxSatProblem& m, const BitString& x) {
    detail::require(x.size() == m.n_vars, "maxsat_objective: length mismatch");
    std::size_t unsat = 0;
    for (const auto& clause : m.clauses) {
        bool sat = false;
        for (int lit : clause) {
            const std::size_t var = static_cast<std::size_t>(std::abs(lit)) - 1;
            if ((lit > 0) == (x[var] == 1)) {
                sat = true;
                break;
            }
        }
        if (!sat) ++unsat;
    }
    return static_cast<double>(unsat);
}

inline Problem make_problem(MaxSatProblem m) {
    const std::size_t n = m.n_vars;
    auto shared = std::make_shared<const MaxSatProblem>(std::move(m));
    return Problem("maxsat", n, [shared](const BitString& x) { return maxsat_objective(*shared, x); });
}

/// DIMACS CNF: "c" comment lines, one "p cnf <vars> <clauses>" line, then
/// zero-terminated clauses that may span lines. A line starting with '%'
/// ends the clause section (SATLIB convention).
inline MaxSatProblem parse_dimacs_cnf(std::string_view text) {
    MaxSatProblem m;
    bool have_header = false;
    std::size_t declared = 0, header_line = 0, line_no = 0;
    std::vector<int> current;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string line(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const char lead = line[first];
        if (lead == 'c') continue;
        if (lead == '%') break;
        std::istringstream ls(line);
        if (lead == 'p') {
            std::string p, fmt;
            long long vars = -1, clauses = -1;
            if (have_header) throw ParseError("line " + std::to_string(line_no) + ": duplicate problem line");
            if (!(ls >> p >> fmt >> vars >> clauses) || fmt != "cnf" || vars < 0 || clauses < 0)
                throw ParseError("line " + std::to_string(line_no) + ": malformed problem line");
            m.n_vars = static_cast<std::size_t>(vars);
            declared = static_cast<std::size_t>(clauses);
            header_line = line_no;
            have_header = true;
            continue;
        }
        if (!have_header) throw ParseError("line " + std::to_string(line_no) + ": clause before problem line");
        std::string tok;
        while (ls >> tok) {
            long long lit = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), lit);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw ParseError("line " + std::to_string(line_no) + ": bad literal '" + tok + "'");
            if (lit == 0) {
                if (current.size() != 3) ++m.non_three_literal;
                m.clauses.push_back(std::move(current));
                current.clear();
                continue;
            }
            if (static_cast<std::size_t>(std::llabs(lit)) > m.n_vars)
                throw ParseError("line " + std::to_string(line_no) + ": literal " + tok + " exceeds " +
                                 std::to_string(m.n_vars) + " variables");
            current.push_back(static_cast<int>(lit));
        }
    }
    if (!have_header) throw ParseError("dimacs: missing 'p cnf' problem line");
    if (!current.empty()) {
        if (current.size() != 3) ++m.non_three_literal;
        m.clauses.push_back(std::move(current));
    }
    if (m.clauses.size() != declared)
        throw ParseError("line " + std::to_string(header_line) + ": problem line declares " + std::to_string(declared) +
                         " clauses but " + std::to_string(m.clauses.size()) + " were found");
    return m;
}

inline std::string serialize_dimacs(const MaxSatProblem& m) {
    std::ostringstream os;
    os << "p cnf " << m.n_vars << ' ' << m.clauses.size() << '\n';
    for (const auto& clause : m.clauses) {
        for (int lit : clause) os << lit << ' ';
        os << "0\n";
    }
    return os.str();
}

/// Uniform random 3-SAT with distinct variables per clause.
inline MaxSatProblem random_3sat(std::size_t n_vars, std::size_t n_clauses, std::uint64_t seed) {
    detail::require(n_vars >= 3, "random_3sat: need at least 3 variables");
    Rng rng(seed);
    MaxSatProblem m;
    m.n_vars = n_vars;
    for (std::size_t c = 0; c < n_clauses; ++c) {
        std::vector<int> clause;
        while (clause.size() < 3) {
            const int v = 1 + static_cast<int>(rng.below(n_vars));
            if (std::none_of(clause.begin(), clause.end(), [v](int l) { return std::abs(l) == v; }))
                clause.push_back(rng.bernoulli(0.5) ? v : -v);
        }
        m.clauses.push_back(std::move(clause));
    }
    return m;
}

// ---------------------------------------------------------------- synthetic (test functions, not benchmarks)

/// -(number of ones); optimum -n at all ones.
inline Problem onemax(std::size_t n) {
    return Problem("onemax", n, [](const BitString& x) { return -static_cast<double>(x.count()); },
                   -static_cast<double>(n));
}

/// Concatenated k-bit deceptive traps, negated: each block scores k when all
/// ones and k-1-u otherwise (u = ones in the block). Optimum -n at all ones.
inline Problem deceptive_trap(std::size_t n, std::size_t k = 4) {
    detail::require(k >= 2 && n % k == 0, "deceptive_trap: n must be a multiple of k >= 2");
    return Problem(
        "trap", n,
        [k](const BitString& x) {
            double total = 0.0;
            for (std::size_t b = 0; b < x.size(); b += k) {
                std::size_t u = 0;
                for (std::size_t i = b; i < b + k; ++i) u += x[i];
                total += u == k ? static_cast<double>(k) : static_cast<double>(k - 1 - u);
            }
            return -total;
        },
        -static_cast<double>(n));
}

// ---------------------------------------------------------------- helpers

/// Problem seen through a variable ordering: position j of the new bit string
/// holds original variable order[j].
inline Problem permuted(const Problem& base, const std::vector<std::size_t>& order) {
    detail::require(order.size() == base.dimension(), "permuted: order length mismatch");
    std::vector<bool> seen(order.size(), false);
    for (auto v : order) {
        detail::require(v < order.size() && !seen[v], "permuted: order is not a permutation");
        seen[v] = true;
    }
    return Problem(
        base.name(), base.dimension(),
        [base, order](const BitString& y) {
            BitString x(y.size());
            for (std::size_t j = 0; j < y.size(); ++j) x.set(order[j], y[j] == 1);
            return base(x);
        },
        base.optimum());
}

/// Exhaustive minimization for dimension <= 24; ties go to the
/// lexicographically smallest string.
inline std::pair<BitString, double> brute_force_optimum(const Problem& problem, std::size_t n_max = 24) {
    const std::size_t n = problem.dimension();
    detail::require(n <= n_max && n <= 24, "brute_force_optimum: dimension " + std::to_string(n) + " too large");
    BitString best_x;
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
        BitString x = BitString::from_index(code, n);
        const double f = problem(x);
        if (best_x.empty() || f < best) {
            best = f;
            best_x = std::move(x);
        }
    }
    return {best_x, best};
}

} // namespace tneda
