#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tneda/problems.hpp"

using namespace tneda;

namespace {

std::string slurp(const std::string& name) {
    std::ifstream in(std::string(TNEDA_FIXTURE_DIR) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

BitString random_bits(std::size_t n, Rng& rng) {
    BitString x(n);
    for (std::size_t i = 0; i < n; ++i) x.set(i, rng.bernoulli(0.5));
    return x;
}

} // namespace

TEST(Dimacs, FixtureParsesAndEvaluates) {
    const std::string text = slurp("uf20_91.cnf");
    const auto m = parse_dimacs_cnf(text);
    EXPECT_EQ(m.n_vars, 20u);
    EXPECT_EQ(m.clauses.size(), 91u);
    EXPECT_TRUE(m.is_three_sat());
    const auto clauses = oracle::naive_clauses(text);
    ASSERT_EQ(clauses, m.clauses);
    const Problem p = make_problem(m);
    Rng rng(1);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto x = random_bits(20, rng);
        mismatches += p(x) != oracle::naive_unsat(clauses, x);
    }
    EXPECT_EQ(mismatches, 0);
}

TEST(Dimacs, SerializeParseIdentity) {
    const auto m = parse_dimacs_cnf(slurp("uf20_91.cnf"));
    const std::string once = serialize_dimacs(m);
    const auto back = parse_dimacs_cnf(once);
    EXPECT_EQ(back.n_vars, m.n_vars);
    EXPECT_EQ(back.clauses, m.clauses);
    EXPECT_EQ(serialize_dimacs(back), once);
    const auto r = random_3sat(30, 120, 9);
    EXPECT_EQ(parse_dimacs_cnf(serialize_dimacs(r)).clauses, r.clauses);
}

TEST(Dimacs, FormatDetails) {
    const auto m = parse_dimacs_cnf("c x\np cnf 3 2\n1 -2\n 3 0 -1 2 0\n");
    ASSERT_EQ(m.clauses.size(), 2u);
    EXPECT_EQ(m.clauses[0], (std::vector<int>{1, -2, 3}));
    EXPECT_EQ(m.clauses[1], (std::vector<int>{-1, 2}));
    EXPECT_FALSE(m.is_three_sat());
    EXPECT_EQ(m.non_three_literal, 1u);
    // Unterminated final clause is accepted.
    EXPECT_EQ(parse_dimacs_cnf("p cnf 2 1\n1 2").clauses.size(), 1u);
    // Windows line endings.
    EXPECT_EQ(parse_dimacs_cnf("p cnf 2 1\r\n1 -2 0\r\n").clauses[0], (std::vector<int>{1, -2}));
}

TEST(Dimacs, Errors) {
    EXPECT_THROW(parse_dimacs_cnf("1 2 0\n"), ParseError);
    EXPECT_THROW(parse_dimacs_cnf("p cnf 2 1\np cnf 2 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_dimacs_cnf("p dnf 2 1\n1 0\n"), ParseError);
    EXPECT_THROW(parse_dimacs_cnf("p cnf 2 1\n3 0\n"), ParseError);
    EXPECT_THROW(parse_dimacs_cnf("p cnf 2 1\n1 x 0\n"), ParseError);
    EXPECT_THROW(parse_dimacs_cnf(""), ParseError);
    try {
        parse_dimacs_cnf("c\np cnf 2 3\n1 0\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Knapsack, FixtureMatchesIndependentChecker) {
    const std::string text = slurp("knapsack_30.txt");
    const oracle::NaiveKnapsack naive(text);
    const auto k = parse_knapsack(text);
    const Problem p = make_problem(k);
    Rng rng(2);
    int mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const auto x = random_bits(naive.values.size(), rng);
        mismatches += p(x) != naive.objective(x);
    }
    EXPECT_EQ(mismatches, 0);
    EXPECT_EQ(parse_knapsack(serialize_knapsack(k)).values, k.values);
    EXPECT_EQ(serialize_knapsack(parse_knapsack(serialize_knapsack(k))), serialize_knapsack(k));
}

TEST(Knapsack, DpMatchesBruteForce) {
    const auto k = parse_knapsack(slurp("knapsack_12.txt"));
    const Problem p = make_problem(k);
    const auto [x, f] = knapsack_dp_optimum(k);
    EXPECT_EQ(brute_force_optimum(p).second, f);
    EXPECT_EQ(p(x), f);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = random_knapsack(14, seed);
        EXPECT_EQ(knapsack_dp_optimum(r).second, brute_force_optimum(make_problem(r)).second);
    }
}

TEST(Knapsack, InfeasibleAlwaysWorseThanFeasible) {
    const auto k = random_knapsack(10, 3);
    const Problem p = make_problem(k);
    double worst_feasible = -1e300, best_infeasible = 1e300;
    for (std::uint64_t c = 0; c < 1024; ++c) {
        const auto x = BitString::from_index(c, 10);
        long long wt = 0;
        for (std::size_t i = 0; i < 10; ++i) wt += x[i] ? k.weights[i] : 0;
        if (wt <= k.capacity)
            worst_feasible = std::max(worst_feasible, p(x));
        else
            best_infeasible = std::min(best_infeasible, p(x));
    }
    EXPECT_LT(worst_feasible, best_infeasible);
}

TEST(Knapsack, ParseErrors) {
    EXPECT_THROW(parse_knapsack(""), ParseError);
    EXPECT_THROW(parse_knapsack("2 10\n1 2\n"), ParseError);
    EXPECT_THROW(parse_knapsack("1 10\n1 2\n7"), ParseError);
    EXPECT_THROW(parse_knapsack("1 0\n1 2\n"), ParseError);
    EXPECT_THROW(parse_knapsack("1 10\n-1 2\n"), ParseError);
}

TEST(Portfolio, ObjectiveAndPenalties) {
    PortfolioProblem pp;
    pp.sigma = Eigen::MatrixXd::Identity(4, 4);
    pp.sigma(0, 1) = pp.sigma(1, 0) = 0.5;
    pp.n_min = 1;
    pp.n_max = 2;
    pp.penalty_c = 10.0;
    const Problem p = make_problem(pp);
    EXPECT_DOUBLE_EQ(p(BitString::from_string("1100")), (1 + 1 + 0.5 + 0.5) / 4.0);
    EXPECT_DOUBLE_EQ(p(BitString::from_string("0010")), 1.0);
    EXPECT_DOUBLE_EQ(p(BitString::from_string("1110")), 10.0);
    EXPECT_DOUBLE_EQ(p(BitString::from_string("0000")), 10.0);
    pp.n_min = 0;
    EXPECT_TRUE(std::isinf(make_problem(pp)(BitString::from_string("0000"))));
    EXPECT_THROW(p(BitString::from_string("11")), DomainError);
}

TEST(Portfolio, CsvLoading) {
    const auto cov = load_covariance_csv(slurp("cov_5.csv"));
    EXPECT_EQ(cov.rows(), 5);
    EXPECT_LT((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-18);
    const auto ret = load_covariance_csv(slurp("returns_6.csv"), CsvMode::Returns, true);
    EXPECT_EQ(ret.rows(), 6);
    EXPECT_GT(ret(0, 0), 0.0);
    EXPECT_THROW(load_covariance_csv("1,2\n3\n"), ParseError);
    EXPECT_THROW(load_covariance_csv("1,x\n3,4\n"), ParseError);
    EXPECT_THROW(load_covariance_csv("1,2\n3,4\n"), ParseError);  // asymmetric
    EXPECT_THROW(load_covariance_csv("1,2,3\n2,4,5\n"), ParseError);  // not square
    EXPECT_THROW(load_covariance_csv(""), ParseError);
    try {
        load_covariance_csv("1,2\n\n2,oops\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Portfolio, SampleCovarianceMatchesDefinition) {
    Eigen::MatrixXd r(4, 2);
    r << 1, 2, 2, 4, 3, 5, 6, 1;
    const auto c = sample_covariance(r);
    const double m0 = 3.0, m1 = 3.0;
    double s01 = 0;
    for (int i = 0; i < 4; ++i) s01 += (r(i, 0) - m0) * (r(i, 1) - m1);
    EXPECT_NEAR(c(0, 1), s01 / 3.0, 1e-15);
}

TEST(Portfolio, RandomInstanceIsSeededAndPsd) {
    const auto a = random_portfolio(12, 3, 5, 4), b = random_portfolio(12, 3, 5, 4);
    EXPECT_EQ(a.sigma, b.sigma);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.sigma);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Synthetic, OneMaxTrapAndPermutation) {
    const Problem om = onemax(6);
    EXPECT_EQ(om(BitString::from_string("111111")), -6.0);
    EXPECT_EQ(*om.optimum(), -6.0);
    const Problem trap = deceptive_trap(8);
    EXPECT_EQ(trap(BitString::from_string("11111111")), -8.0);
    EXPECT_EQ(trap(BitString::from_string("00000000")), -6.0);
    EXPECT_EQ(trap(BitString::from_string("11100000")), -3.0);
    EXPECT_EQ(brute_force_optimum(trap).second, -8.0);
    EXPECT_THROW(deceptive_trap(6, 4), DomainError);

    const auto k = random_knapsack(6, 1);
    const Problem base = make_problem(k);
    const std::vector<std::size_t> order{5, 3, 1, 0, 2, 4};
    const Problem perm = permuted(base, order);
    for (std::uint64_t c = 0; c < 64; ++c) {
        const auto y = BitString::from_index(c, 6);
        BitString x(6);
        for (std::size_t j = 0; j < 6; ++j) x.set(order[j], y[j] == 1);
        EXPECT_EQ(perm(y), base(x));
    }
    EXPECT_THROW(permuted(base, {0, 0, 1, 2, 3, 4}), DomainError);
}

TEST(Synthetic, RelativeError) {
    EXPECT_DOUBLE_EQ(relative_error(-90.0, -100.0), 0.1);
    EXPECT_DOUBLE_EQ(relative_error(3.0, 0.0), 3.0);
    EXPECT_DOUBLE_EQ(relative_error(-100.0, -100.0), 0.0);
}
