#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "tneda/distribution.hpp"
#include "tneda/eda.hpp"
#include "tneda/mps.hpp"
#include "tneda/selection.hpp"

namespace tneda {

/// Distribution over the pool with weights exp(-f(x) / T). Entries whose
/// weight underflows to zero are left out of the support.
inline FiniteDistribution boltzmann_target(const SolutionBank& bank, double temperature, const PoolPolicy& pool) {
    const auto idx = pool_indices(bank, pool);
    detail::require(!idx.empty(), "boltzmann_target: empty pool");
    std::vector<double> f;
    f.reserve(idx.size());
    for (auto i : idx) f.push_back(bank[i].f);
    const auto w = boltzmann_weights(f, temperature);
    std::vector<std::pair<BitString, double>> entries;
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (w[k] > 0.0) entries.emplace_back(bank[idx[k]].x, w[k]);
    return FiniteDistribution(std::move(entries));
}

inline FiniteDistribution boltzmann_target(const SolutionBank& bank, const std::vector<std::size_t>& pool,
                                           double temperature) {
    detail::require(!pool.empty(), "boltzmann_target: empty pool");
    std::vector<double> f;
    f.reserve(pool.size());
    for (auto i : pool) f.push_back(bank[i].f);
    const auto w = boltzmann_weights(f, temperature);
    std::vector<std::pair<BitString, double>> entries;
    for (std::size_t k = 0; k < pool.size(); ++k)
        if (w[k] > 0.0) entries.emplace_back(bank[pool[k]].x, w[k]);
    return FiniteDistribution(std::move(entries));
}

/// KL(target || model followed by independent bit flips with rate p_flip).
inline KlValue diffused_kl(const Mps& model, double p_flip, const FiniteDistribution& target) {
    const MpsDistribution diffused(apply_diffusion(model, p_flip));
    return model_kl_vs_target(diffused, target);
}

struct KlReport {
    std::size_t generation = 0;
    KlValue kl_primary;
    KlValue kl_reference;

    /// kl_primary - kl_reference; NaN unless both are finite.
    double delta() const noexcept {
        if (!kl_primary.finite() || !kl_reference.finite()) return std::numeric_limits<double>::quiet_NaN();
        return kl_primary.value - kl_reference.value;
    }
};

/// Bystander model trained on the primary's parents each generation.
struct ReferenceConfig {
    ModelConfig model;
    /// Bit-flip rate of the reference's effective distribution.
    double p_flip = 0.0;
    /// Train from the exact generator state the primary used (delta is then 0
    /// when the configs coincide). Otherwise an independent stream derived from
    /// the run seed is used.
    bool mirror_rng = false;
};

struct ReferenceRun {
    std::vector<RunRecord> records;
    std::vector<KlReport> kl;
};

/// Runs the EDA with a reference model alongside. Every Boltzmann generation,
/// both models are trained on the same parents and their effective
/// distributions (model plus bit-flip diffusion) are compared with the
/// selection distribution. Only the primary's samples drive the run.
inline ReferenceRun run_with_reference(const Problem& problem, const ModelConfig& primary,
                                       const SelectionPolicy& selection, const EdaConfig& cfg,
                                       const ReferenceConfig& reference, Rng& rng) {
    detail::require(std::holds_alternative<BoltzmannSelection>(selection),
                    "run_with_reference: requires Boltzmann selection (the KL target)");
    detail::require(primary.kind != ModelKind::GeneticAlgorithm && reference.model.kind != ModelKind::GeneticAlgorithm,
                    "run_with_reference: both configs need a generative model");
    ReferenceRun out;
    const Rng reference_base = rng.split("reference");
    std::optional<FittedModel> ref_model;
    auto observer = [&](const GenerationView& view) {
        const FiniteDistribution target = boltzmann_target(view.bank, view.pool, view.temperature);
        Rng ref_rng = reference.mirror_rng ? view.training_rng : reference_base.split(view.generation);
        ref_model.emplace(fit_model(reference.model, view.parents, ref_model ? &*ref_model : nullptr,
                                    problem.dimension(), ref_rng));
        KlReport r;
        r.generation = view.generation;
        r.kl_primary = diffused_kl(view.model->as_mps(), cfg.mutation_rate, target);
        r.kl_reference = diffused_kl(ref_model->as_mps(), reference.p_flip, target);
        out.kl.push_back(r);
    };
    out.records = run_eda(problem, primary, selection, cfg, rng, observer);
    return out;
}

} // namespace tneda
