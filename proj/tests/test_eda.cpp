#include <gtest/gtest.h>

#include <cmath>

#include "tneda/eda.hpp"

using namespace tneda;

namespace {

EdaConfig small_config() {
    EdaConfig c;
    c.initial_population = 100;
    c.n_parents = 100;
    c.n_children = 100;
    c.generations = 40;
    c.call_budget = 1500;
    return c;
}

ModelConfig born(std::size_t chi = 2) {
    ModelConfig m;
    m.kind = ModelKind::BornMachine;
    m.train.chi_max = chi;
    m.train.learning_rate = 0.15;
    return m;
}

BoltzmannSelection annealed_top(std::size_t k) { return {AnnealedSchedule{}, TopKPool{k}}; }

void check_invariants(const std::vector<RunRecord>& recs, const EdaConfig& cfg) {
    ASSERT_FALSE(recs.empty());
    EXPECT_EQ(recs.front().generation, 0u);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        EXPECT_LE(recs[i].calls, cfg.call_budget);
        EXPECT_LE(recs[i].generation, cfg.generations);
        if (i == 0) continue;
        EXPECT_EQ(recs[i].generation, recs[i - 1].generation + 1);
        EXPECT_GE(recs[i].calls, recs[i - 1].calls);
        EXPECT_EQ(recs[i].calls, recs[i - 1].calls + recs[i].new_unique);
        EXPECT_LE(recs[i].best, recs[i - 1].best);
    }
}

} // namespace

TEST(Eda, BornMachineSolvesSmallOneMax) {
    const Problem p = onemax(12);
    Rng rng(1);
    const auto cfg = small_config();
    const auto recs = run_eda(p, born(), annealed_top(100), cfg, rng);
    check_invariants(recs, cfg);
    EXPECT_EQ(recs.back().best, -12.0);
    EXPECT_EQ(recs.back().best_x, std::string(12, '1'));
    EXPECT_TRUE(std::isnan(recs.front().temperature));
    EXPECT_GT(recs[1].temperature, 0.0);
}

TEST(Eda, BudgetIsNeverExceeded) {
    const Problem p = onemax(16);
    for (std::size_t budget : {101u, 150u, 333u}) {
        auto cfg = small_config();
        cfg.call_budget = budget;
        cfg.mutation_rate = 0.2;
        Rng rng(budget);
        const auto recs = run_eda(p, born(), annealed_top(50), cfg, rng);
        check_invariants(recs, cfg);
        EXPECT_EQ(recs.back().calls, budget);
        EXPECT_TRUE(recs.back().budget_exhausted);
    }
}

TEST(Eda, CountsEveryDistinctEvaluationOnce) {
    std::size_t evaluations = 0;
    const Problem counted("counted", 10, [&](const BitString& x) {
        ++evaluations;
        return -static_cast<double>(x.count());
    });
    Rng rng(2);
    const auto cfg = small_config();
    const auto recs = run_eda(counted, born(), annealed_top(100), cfg, rng);
    EXPECT_EQ(evaluations, recs.back().calls);
}

TEST(Eda, DeterministicGivenSeed) {
    const Problem p = deceptive_trap(12, 4);
    const auto cfg = small_config();
    for (auto kind : {ModelKind::BornMachine, ModelKind::ChainBayes, ModelKind::GeneticAlgorithm}) {
        ModelConfig m = born();
        m.kind = kind;
        Rng a(7), b(7);
        const auto ra = run_eda(p, m, annealed_top(100), cfg, a);
        const auto rb = run_eda(p, m, annealed_top(100), cfg, b);
        ASSERT_EQ(ra.size(), rb.size());
        for (std::size_t i = 0; i < ra.size(); ++i) {
            EXPECT_EQ(ra[i].best_x, rb[i].best_x);
            EXPECT_EQ(ra[i].calls, rb[i].calls);
            EXPECT_EQ(ra[i].median, rb[i].median);
        }
    }
}

TEST(Eda, CollapsedModelStopsFindingNewSolutions) {
    // Greedy selection of one parent with no mutation: the model concentrates
    // on a single string and the bank stops growing.
    const Problem p = onemax(10);
    auto cfg = small_config();
    cfg.mutation_rate = 0.0;
    cfg.generations = 60;
    ModelConfig m = born(2);
    m.train.sweeps = 4;
    m.train.learning_rate = 0.3;
    Rng rng(3);
    const auto recs = run_eda(p, m, GreedySelection{1}, cfg, rng);
    check_invariants(recs, cfg);
    std::size_t tail_new = 0;
    for (std::size_t i = recs.size() - 10; i < recs.size(); ++i) tail_new += recs[i].new_unique;
    EXPECT_LE(tail_new, 2u);
    EXPECT_LT(recs.back().calls, cfg.call_budget);
}

TEST(Eda, GeneticAlgorithmElitismKeepsBest) {
    const Problem p = deceptive_trap(16, 4);
    auto cfg = small_config();
    cfg.population_update = PopulationUpdate::ReplaceWithNewUnique;
    ModelConfig m;
    m.kind = ModelKind::GeneticAlgorithm;
    std::vector<double> best_seen;
    Rng rng(4);
    const auto recs = run_eda(p, m, TournamentSelection{3}, cfg, rng, [&](const GenerationView& v) {
        EXPECT_EQ(v.model, nullptr);
        EXPECT_TRUE(std::isnan(v.temperature));
        best_seen.push_back(v.bank.best().f);
    });
    check_invariants(recs, cfg);
    EXPECT_EQ(best_seen.size(), recs.size() - 1);
    EXPECT_LT(recs.back().best, recs.front().best);
}

TEST(Eda, PositiveMpsAndChainBayesRun) {
    const Problem p = onemax(10);
    auto cfg = small_config();
    cfg.population_update = PopulationUpdate::ReplaceWithNewUnique;
    cfg.mutation_rate = 0.0;
    cfg.n_parents = 10;
    cfg.elitism = false;
    ModelConfig pos;
    pos.kind = ModelKind::PositiveMps;
    pos.train.chi_max = 2;
    pos.train.learning_rate = 0.15;
    pos.train.fresh_init = false;
    Rng a(5);
    const auto rp = run_eda(p, pos, GreedySelection{10}, cfg, a);
    check_invariants(rp, cfg);
    EXPECT_LT(rp.back().best, rp.front().best);

    ModelConfig cb;
    cb.kind = ModelKind::ChainBayes;
    Rng b(6);
    const auto rc = run_eda(p, cb, TournamentSelection{3}, cfg, b);
    check_invariants(rc, cfg);
    EXPECT_EQ(rc.back().best, -10.0);
}

TEST(Eda, ObserverSeesModelBeforeSampling) {
    const Problem p = onemax(8);
    auto cfg = small_config();
    cfg.generations = 3;
    std::size_t calls = 0;
    Rng rng(8);
    run_eda(p, born(), BoltzmannSelection{FixedSchedule{0.5}, AllUniquePool{}}, cfg, rng,
            [&](const GenerationView& v) {
                ++calls;
                ASSERT_NE(v.model, nullptr);
                EXPECT_EQ(v.parents.size(), cfg.n_parents);
                EXPECT_EQ(v.pool.size(), v.bank.size());
                EXPECT_EQ(v.temperature, 0.5);
                // Replaying training from the snapshot reproduces the model.
                Rng replay = v.training_rng;
                const auto again = fit_model(born(), v.parents, nullptr, 8, replay);
                EXPECT_EQ(std::get<Mps>(again.model()), std::get<Mps>(v.model->model()));
            });
    EXPECT_EQ(calls, 3u);
}

TEST(Eda, AdaptiveScheduleAndValidation) {
    const Problem p = onemax(10);
    auto cfg = small_config();
    Rng rng(9);
    const auto recs = run_eda(p, born(), BoltzmannSelection{AdaptiveGapSchedule{}, AllUniquePool{}}, cfg, rng);
    for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_GE(recs[i].temperature, kFloorTemperature);

    auto bad = cfg;
    bad.call_budget = bad.initial_population;
    EXPECT_THROW(run_eda(p, born(), annealed_top(10), bad, rng), DomainError);
    ModelConfig ga;
    ga.kind = ModelKind::GeneticAlgorithm;
    EXPECT_THROW(fit_model(ga, {}, nullptr, 3, rng), DomainError);
}
