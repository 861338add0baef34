#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "tneda/mps.hpp"

using namespace tneda;

namespace {

struct Case {
    std::size_t n;
    std::size_t chi;
    Encoding mode;
};

std::vector<Case> cases() {
    std::vector<Case> out;
    for (auto mode : {Encoding::Amplitude, Encoding::DirectPositive})
        for (std::size_t n : {1, 2, 5, 9})
            for (std::size_t chi : {1, 3, 4}) out.push_back({n, chi, mode});
    return out;
}

} // namespace

TEST(Mps, RandomInitRespectsBondCaps) {
    Rng rng(1);
    const Mps m = random_init(6, 16, Encoding::Amplitude, rng);
    const std::vector<std::size_t> expected{1, 2, 4, 8, 4, 2, 1};
    EXPECT_EQ(m.bond_dims(), expected);
    const Mps p = random_init(10, 3, Encoding::DirectPositive, rng);
    for (const auto& t : p.tensors())
        for (double v : t.data()) {
            EXPECT_GT(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    EXPECT_LE(p.max_bond(), 3u);
}

TEST(Mps, ConstructorRejectsBrokenInvariants) {
    EXPECT_THROW(Mps({}, Encoding::Amplitude, 2), DomainError);
    EXPECT_THROW(Mps({Tensor3(1, 2), Tensor3(3, 1)}, Encoding::Amplitude, 4), DomainError);
    EXPECT_THROW(Mps({Tensor3(1, 3), Tensor3(3, 1)}, Encoding::Amplitude, 2), DomainError);
    EXPECT_THROW(Mps({Tensor3(2, 1)}, Encoding::Amplitude, 2), DomainError);
    Tensor3 neg(1, 1, 0.5);
    neg(0, 1, 0) = -0.1;
    EXPECT_THROW(Mps({neg}, Encoding::DirectPositive, 1), DomainError);
    EXPECT_NO_THROW(Mps({neg}, Encoding::Amplitude, 1));
}

TEST(Mps, PartitionFunctionAndProbabilitiesMatchEnumeration) {
    std::uint64_t seed = 100;
    for (const auto& c : cases()) {
        const Mps m = random_init(c.n, c.chi, c.mode, seed++);
        const double z = oracle::enumerate_z(m);
        EXPECT_LT(oracle::rel_diff(partition_function(m), z), 1e-11) << "n=" << c.n << " chi=" << c.chi;
        const auto p = oracle::enumerate_probabilities(m);
        const MpsDistribution dist(m);
        double total = 0.0;
        for (std::uint64_t code = 0; code < p.size(); ++code) {
            const auto x = BitString::from_index(code, c.n);
            const double q = dist.probability(x);
            total += q;
            EXPECT_LT(oracle::rel_diff(q, p[code]), 1e-10);
            EXPECT_LT(oracle::rel_diff(probability(m, x), p[code]), 1e-10);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Mps, LogScaleSurvivesLongChains) {
    // 400 sites of all-ones 1x1 tensors: Z = 2^400 overflows nothing in log space.
    std::vector<Tensor3> ts(400, Tensor3(1, 1, 1.0));
    const Mps big(ts, Encoding::DirectPositive, 1);
    EXPECT_NEAR(log_partition_function(big), 400 * std::log(2.0), 1e-9);
    EXPECT_NEAR(log_probability(big, BitString(400)), -400 * std::log(2.0), 1e-9);
    std::vector<Tensor3> tiny(400, Tensor3(1, 1, 1e-3));
    const Mps small(tiny, Encoding::Amplitude, 1);
    EXPECT_NEAR(log_partition_function(small), 400 * (std::log(2.0) + 2 * std::log(1e-3)), 1e-7);
}

TEST(Mps, ZeroNetworkHasNoDistribution) {
    const Mps zero({Tensor3(1, 1, 0.0), Tensor3(1, 1, 0.0)}, Encoding::DirectPositive, 1);
    EXPECT_THROW(log_partition_function(zero), DomainError);
}

TEST(Mps, ZeroProbabilityStringsGiveMinusInfinity) {
    Tensor3 t(1, 1);
    t(0, 0, 0) = 1.0;  // only x = 0 has mass
    const Mps m({t, t}, Encoding::DirectPositive, 1);
    EXPECT_EQ(log_probability(m, BitString::from_string("01")), -std::numeric_limits<double>::infinity());
    EXPECT_NEAR(probability(m, BitString::from_string("00")), 1.0, 1e-15);
}

TEST(Mps, SamplerMatchesExactDistribution) {
    for (auto mode : {Encoding::Amplitude, Encoding::DirectPositive}) {
        const Mps m = random_init(6, 3, mode, 77);
        const auto p = oracle::enumerate_probabilities(m);
        MpsSampler sampler(m);
        Rng rng(9);
        std::vector<double> freq(p.size(), 0.0);
        const int draws = 100000;
        for (int i = 0; i < draws; ++i) freq[oracle::code_of(sampler.sample(rng))] += 1.0 / draws;
        double tv = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) tv += 0.5 * std::abs(freq[k] - p[k]);
        EXPECT_LT(tv, 0.02);
    }
}

TEST(Mps, SamplerIsDeterministicPerSeed) {
    const Mps m = random_init(8, 2, Encoding::Amplitude, 3);
    Rng a(5), b(5);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(perfect_sample(m, a), perfect_sample(m, b));
}

TEST(Mps, SquaredNetworkHasSameDistribution) {
    const Mps m = random_init(5, 3, Encoding::Amplitude, 12);
    const Mps sq = squared_network(m);
    EXPECT_EQ(sq.mode(), Encoding::Linear);
    EXPECT_EQ(sq.chi_max(), 9u);
    const auto p = oracle::enumerate_probabilities(m);
    for (std::uint64_t c = 0; c < p.size(); ++c)
        EXPECT_LT(oracle::rel_diff(probability(sq, BitString::from_index(c, 5)), p[c]), 1e-10);
}

TEST(Mps, DiffusionMatchesBruteForceSum) {
    for (auto mode : {Encoding::Amplitude, Encoding::DirectPositive})
        for (double pf : {0.0, 0.005, 0.01, 0.025, 0.3, 0.5, 1.0}) {
            const Mps m = random_init(6, 3, mode, 31);
            const auto q = oracle::diffuse(oracle::enumerate_probabilities(m), 6, pf);
            const MpsDistribution d(apply_diffusion(m, pf));
            for (std::uint64_t c = 0; c < q.size(); ++c)
                EXPECT_LT(oracle::rel_diff(d.probability(BitString::from_index(c, 6)), q[c]), 1e-9);
        }
}

TEST(Mps, TensorNoise) {
    Rng rng(4);
    const Mps m = random_init(5, 2, Encoding::DirectPositive, rng);
    EXPECT_EQ(add_tensor_noise(m, 0.0, rng), m);
    const Mps noisy = add_tensor_noise(m, 5.0, rng);
    for (const auto& t : noisy.tensors())
        for (double v : t.data()) EXPECT_GE(v, 0.0);
    EXPECT_THROW(add_tensor_noise(m, -1.0, rng), DomainError);
}

TEST(Mps, SplitReconstructsUntruncatedTensor) {
    Rng rng(8);
    for (auto absorb : {Absorb::Left, Absorb::Right}) {
        TwoSiteTensor th(3, 2);
        for (double& v : th.data()) v = rng.uniform(-1, 1);
        const auto s = canonicalize_split(th, 100, 0.0, absorb);
        EXPECT_EQ(s.singular_values.size(), 4u);  // min(2*3, 2*2)
        EXPECT_NEAR(s.discarded_weight, 0.0, 1e-15);
        const auto back = merge(s.left, s.right);
        for (std::size_t k = 0; k < th.data().size(); ++k) EXPECT_NEAR(back.data()[k], th.data()[k], 1e-12);

        // The side that did not absorb the singular values is an isometry.
        const Tensor3& iso = absorb == Absorb::Right ? s.left : s.right;
        const std::size_t keep = s.singular_values.size();
        for (std::size_t i = 0; i < keep; ++i)
            for (std::size_t j = 0; j < keep; ++j) {
                double dot = 0.0;
                if (absorb == Absorb::Right) {
                    for (std::size_t a = 0; a < iso.left(); ++a)
                        for (std::size_t x = 0; x < 2; ++x) dot += iso(a, x, i) * iso(a, x, j);
                } else {
                    for (std::size_t x = 0; x < 2; ++x)
                        for (std::size_t b = 0; b < iso.right(); ++b) dot += iso(i, x, b) * iso(j, x, b);
                }
                EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-12);
            }
    }
}

TEST(Mps, SplitTruncationMatchesEigenvalueOracle) {
    Rng rng(21);
    TwoSiteTensor th(4, 4);
    for (double& v : th.data()) v = rng.uniform(-1, 1);
    // Singular values are square roots of the eigenvalues of M^T M.
    Eigen::MatrixXd mat(8, 8);
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t s1 = 0; s1 < 2; ++s1)
            for (std::size_t s2 = 0; s2 < 2; ++s2)
                for (std::size_t b = 0; b < 4; ++b) mat(a * 2 + s1, s2 * 4 + b) = th(a, s1, s2, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat.transpose() * mat);
    std::vector<double> sv;
    for (Eigen::Index k = 7; k >= 0; --k) sv.push_back(std::sqrt(std::max(eig.eigenvalues()(k), 0.0)));

    const auto s = canonicalize_split(th, 3, 0.0);
    ASSERT_EQ(s.singular_values.size(), 3u);
    double tail = 0.0;
    for (std::size_t k = 3; k < 8; ++k) tail += sv[k] * sv[k];
    EXPECT_NEAR(s.discarded_weight, std::sqrt(tail), 1e-10);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.singular_values[k], sv[k], 1e-10);

    // Relative cutoff: keep only values above half the largest.
    const auto c = canonicalize_split(th, 8, 0.5);
    std::size_t expected = 0;
    while (expected < 8 && sv[expected] >= 0.5 * sv[0]) ++expected;
    EXPECT_EQ(c.singular_values.size(), expected);
}

TEST(Mps, SplitOfRankOneTensorKeepsOneValue) {
    TwoSiteTensor th(1, 1);
    th(0, 0, 0, 0) = 1;
    th(0, 0, 1, 0) = 2;
    th(0, 1, 0, 0) = 3;
    th(0, 1, 1, 0) = 6;
    const auto s = canonicalize_split(th, 2, 1e-6);
    EXPECT_EQ(s.singular_values.size(), 1u);
    EXPECT_THROW(canonicalize_split(TwoSiteTensor(1, 1), 2, 1e-6), DomainError);
}

TEST(Mps, DumpLoadRoundTripIsExact) {
    for (auto mode : {Encoding::Amplitude, Encoding::DirectPositive}) {
        const Mps m = random_init(7, 3, mode, 55);
        std::stringstream ss;
        write_mps(ss, m);
        EXPECT_EQ(read_mps(ss), m);
    }
    std::istringstream bad("tneda-mps 1\nsites 2 mode amplitude chi_max 2\nbonds 1 2 1\n0.1 0.2 0.3");
    EXPECT_THROW(read_mps(bad), ParseError);
    std::istringstream wrong("not-an-mps");
    EXPECT_THROW(read_mps(wrong), ParseError);
}
