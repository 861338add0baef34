#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "tneda/bit_string.hpp"
#include "tneda/chain_bayes.hpp"
#include "tneda/error.hpp"
#include "tneda/mps.hpp"
#include "tneda/problems.hpp"
#include "tneda/rng.hpp"
#include "tneda/selection.hpp"
#include "tneda/training.hpp"

namespace tneda {

enum class ModelKind { BornMachine, PositiveMps, ChainBayes, GeneticAlgorithm };

inline std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::BornMachine: return "born_machine";
    case ModelKind::PositiveMps: return "positive_mps";
    case ModelKind::ChainBayes: return "chain_bayes";
    case ModelKind::GeneticAlgorithm: return "genetic_algorithm";
    }
    return "?";
}

/// How the population used for tournament/greedy selection evolves.
/// AppendToBank: the population is the whole bank of evaluated solutions.
/// ReplaceWithNewUnique: the population is this generation's distinct
/// children (plus the best-so-far solution when elitism is on).
enum class PopulationUpdate { ReplaceWithNewUnique, AppendToBank };

struct ModelConfig {
    ModelKind kind = ModelKind::BornMachine;
    TrainConfig train;
    /// Std-dev of Gaussian noise added to every tensor entry after training (tensor models).
    double alpha_noise = 0.0;
    double bayes_smoothing = 1.0;
};

struct EdaConfig {
    std::size_t initial_population = 1000;
    std::size_t n_parents = 1000;
    std::size_t n_children = 1000;
    /// Hard cap on generations; the run also stops once call_budget is spent.
    std::size_t generations = 200;
    double mutation_rate = 0.01;
    std::size_t call_budget = 60000;
    PopulationUpdate population_update = PopulationUpdate::AppendToBank;
    bool elitism = true;

    void validate() const {
        detail::require(call_budget > 0, "EdaConfig: call_budget must be positive");
        detail::require(call_budget > initial_population, "EdaConfig: call_budget must exceed the initial population");
        detail::require(mutation_rate >= 0.0 && mutation_rate <= 1.0, "EdaConfig: mutation_rate outside [0, 1]");
        detail::require(n_parents >= 1 && n_children >= 1, "EdaConfig: n_parents and n_children must be positive");
        detail::require(initial_population >= 1, "EdaConfig: initial_population must be positive");
    }
};

/// Per-generation telemetry. Generation 0 describes the initial population.
struct RunRecord {
    std::size_t generation = 0;
    double best = std::numeric_limits<double>::infinity();
    std::string best_x;
    /// Median objective of this generation's (mutated) children.
    double median = std::numeric_limits<double>::quiet_NaN();
    std::size_t calls = 0;
    std::size_t new_unique = 0;
    /// Boltzmann temperature used for selection; NaN for other policies.
    double temperature = std::numeric_limits<double>::quiet_NaN();
    /// The generation stopped early because the call budget ran out.
    bool budget_exhausted = false;
};

/// A trained generative model with sampling and exact probabilities.
class FittedModel {
public:
    explicit FittedModel(Mps m) : model_(m), sampler_(std::in_place, m), distribution_(std::in_place, std::move(m)) {}
    explicit FittedModel(ChainBayes b) : model_(std::move(b)) {}

    BitString sample(Rng& rng) const {
        if (sampler_) return sampler_->sample(rng);
        return sample_chain_bayes(std::get<ChainBayes>(model_), rng);
    }

    double log_probability(const BitString& x) const {
        if (distribution_) return distribution_->log_probability(x);
        return std::get<ChainBayes>(model_).log_probability(x);
    }

    /// Tensor-network view of the model (chain networks become bond-2 direct-positive MPS).
    Mps as_mps() const {
        if (const auto* m = std::get_if<Mps>(&model_)) return *m;
        return to_mps(std::get<ChainBayes>(model_));
    }

    const std::variant<Mps, ChainBayes>& model() const noexcept { return model_; }

private:
    std::variant<Mps, ChainBayes> model_;
    std::optional<MpsSampler> sampler_;
    std::optional<MpsDistribution> distribution_;
};

/// Trains a fresh (or, for positive MPS, updated) model on `parents`.
/// `previous` is the model from the last generation, used only by incremental kinds.
inline FittedModel fit_model(const ModelConfig& cfg, std::span<const BitString> parents, const FittedModel* previous,
                             std::size_t n_bits, Rng& rng) {
    switch (cfg.kind) {
    case ModelKind::BornMachine: {
        std::optional<Mps> init;
        if (previous && !cfg.train.fresh_init) init = previous->as_mps();
        Mps m = train_born_machine(parents, cfg.train, init, rng);
        if (cfg.alpha_noise > 0.0) m = add_tensor_noise(m, cfg.alpha_noise, rng);
        return FittedModel(std::move(m));
    }
    case ModelKind::PositiveMps: {
        Mps init = previous ? previous->as_mps() : random_init(n_bits, cfg.train.chi_max, Encoding::DirectPositive, rng);
        Mps m = train_positive_mps(parents, cfg.train, init);
        if (cfg.alpha_noise > 0.0) m = add_tensor_noise(m, cfg.alpha_noise, rng);
        return FittedModel(std::move(m));
    }
    case ModelKind::ChainBayes: return FittedModel(fit_chain_bayes(parents, cfg.bayes_smoothing));
    case ModelKind::GeneticAlgorithm: break;
    }
    throw DomainError("fit_model: genetic algorithm has no generative model");
}

/// What an observer sees after the model of a generation has been fitted and
/// before its children are sampled.
struct GenerationView {
    std::size_t generation;
    double temperature;                      ///< NaN unless Boltzmann selection
    const SolutionBank& bank;
    const std::vector<std::size_t>& pool;    ///< bank indices of the Boltzmann pool (empty otherwise)
    const std::vector<BitString>& parents;
    const FittedModel* model;                ///< nullptr for the genetic algorithm
    const Rng& training_rng;                 ///< generator state just before the model was fitted
};

using GenerationObserver = std::function<void(const GenerationView&)>;

namespace detail {

inline double sample_std(std::span<const double> f) {
    std::vector<double> finite;
    for (double v : f)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : finite) mean += v;
    mean /= static_cast<double>(finite.size());
    double ss = 0.0;
    for (double v : finite) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(finite.size() - 1));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

struct Individual {
    BitString x;
    double f;
};

} // namespace detail

/// One EDA run: initialize the bank with uniform random solutions, then per
/// generation compute the temperature, select parents, fit the model (or
/// recombine, for the GA), sample and mutate children, and evaluate the ones
/// not already in the bank. Stops when the bank holds call_budget solutions or
/// after cfg.generations generations. Objective calls never exceed call_budget;
/// children that would overshoot it are dropped unevaluated.
inline std::vector<RunRecord> run_eda(const Problem& problem, const ModelConfig& model_cfg,
                                      const SelectionPolicy& selection, const EdaConfig& cfg, Rng& rng,
                                      const GenerationObserver& observer = {}) {
    cfg.validate();
    model_cfg.train.validate();
    const std::size_t n = problem.dimension();
    SolutionBank bank;
    std::vector<RunRecord> records;
    std::vector<detail::Individual> population;

    {
        std::vector<double> values;
        for (std::size_t i = 0; i < cfg.initial_population; ++i) {
            BitString x(n);
            for (std::size_t b = 0; b < n; ++b) x.set(b, rng.bernoulli(0.5));
            if (bank.contains(x)) continue;
            const double f = problem(x);
            bank.insert(x, f, 0);
            values.push_back(f);
            population.push_back({std::move(x), f});
        }
        RunRecord r;
        r.generation = 0;
        r.best = bank.best().f;
        r.best_x = bank.best().x.to_string();
        r.median = detail::median_of(values);
        r.calls = bank.size();
        r.new_unique = bank.size();
        records.push_back(r);
    }

    double t0 = 1.0;
    if (const auto* b = std::get_if<BoltzmannSelection>(&selection))
        if (const auto* a = std::get_if<AnnealedSchedule>(&b->schedule)) {
            if (a->t0) {
                t0 = *a->t0;
            } else {
                const double sd = detail::sample_std(bank.objectives());
                t0 = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
            }
        }

    std::optional<FittedModel> model;
    if (model_cfg.kind == ModelKind::PositiveMps)
        model.emplace(random_init(n, model_cfg.train.chi_max, Encoding::DirectPositive, rng));

    for (std::size_t g = 1; g <= cfg.generations && bank.size() < cfg.call_budget; ++g) {
        double temperature = std::numeric_limits<double>::quiet_NaN();
        std::vector<std::size_t> pool;
        std::vector<BitString> parents;

        std::vector<double> pop_f;
        auto population_values = [&]() -> std::span<const double> {
            pop_f.clear();
            if (cfg.population_update == PopulationUpdate::AppendToBank)
                for (const auto& e : bank.entries()) pop_f.push_back(e.f);
            else
                for (const auto& ind : population) pop_f.push_back(ind.f);
            return pop_f;
        };
        auto population_member = [&](std::size_t i) -> const BitString& {
            return cfg.population_update == PopulationUpdate::AppendToBank ? bank[i].x : population[i].x;
        };

        if (const auto* b = std::get_if<BoltzmannSelection>(&selection)) {
            if (const auto* a = std::get_if<AnnealedSchedule>(&b->schedule))
                temperature = annealed_temperature(t0, std::min(g - 1, a->t_max), a->t_max);
            else if (const auto* ad = std::get_if<AdaptiveGapSchedule>(&b->schedule))
                temperature = adaptive_temperature(bank, ad->rank, ad->ratio).value_or(kFloorTemperature);
            else
                temperature = std::get<FixedSchedule>(b->schedule).temperature;
            temperature = std::max(temperature, kFloorTemperature);
            pool = pool_indices(bank, b->pool);
            std::vector<double> f;
            f.reserve(pool.size());
            for (auto i : pool) f.push_back(bank[i].f);
            for (auto k : boltzmann_select(std::span<const double>(f), cfg.n_parents, temperature, rng))
                parents.push_back(bank[pool[k]].x);
        } else if (const auto* t = std::get_if<TournamentSelection>(&selection)) {
            for (auto i : tournament_select(population_values(), cfg.n_parents, t->arity, rng))
                parents.push_back(population_member(i));
        } else {
            const auto& gs = std::get<GreedySelection>(selection);
            for (auto i : greedy_select(population_values(), gs.k)) parents.push_back(population_member(i));
        }

        std::vector<BitString> children;
        children.reserve(cfg.n_children);
        if (model_cfg.kind == ModelKind::GeneticAlgorithm) {
            for (std::size_t i = 0; children.size() < cfg.n_children; i += 2) {
                const auto& a = parents[i % parents.size()];
                const auto& b = parents[(i + 1) % parents.size()];
                auto [c1, c2] = two_point_crossover(a, b, rng);
                children.push_back(std::move(c1));
                if (children.size() < cfg.n_children) children.push_back(std::move(c2));
            }
            if (observer) observer(GenerationView{g, temperature, bank, pool, parents, nullptr, rng});
        } else {
            const Rng snapshot = rng;
            model.emplace(fit_model(model_cfg, parents, model ? &*model : nullptr, n, rng));
            if (observer) observer(GenerationView{g, temperature, bank, pool, parents, &*model, snapshot});
            for (std::size_t i = 0; i < cfg.n_children; ++i) children.push_back(model->sample(rng));
        }

        RunRecord r;
        r.generation = g;
        r.temperature = temperature;
        std::vector<double> child_values;
        std::vector<detail::Individual> next;
        std::unordered_map<BitString, bool, BitStringHash> seen;
        for (auto& c : children) {
            BitString x = mutate(std::move(c), cfg.mutation_rate, rng);
            double f;
            if (auto known = bank.lookup(x)) {
                f = *known;
            } else if (bank.size() < cfg.call_budget) {
                f = problem(x);
                bank.insert(x, f, g);
                ++r.new_unique;
            } else {
                r.budget_exhausted = true;
                continue;
            }
            child_values.push_back(f);
            if (seen.emplace(x, true).second) next.push_back({std::move(x), f});
        }
        if (cfg.population_update == PopulationUpdate::ReplaceWithNewUnique) {
            if (cfg.elitism && !seen.contains(bank.best().x)) next.push_back({bank.best().x, bank.best().f});
            if (!next.empty()) population = std::move(next);
        }

        r.best = bank.best().f;
        r.best_x = bank.best().x.to_string();
        r.median = detail::median_of(std::move(child_values));
        r.calls = bank.size();
        records.push_back(std::move(r));
    }
    return records;
}

} // namespace tneda
