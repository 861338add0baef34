#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tneda/diagnostics.hpp"
#include "tneda/eda.hpp"
#include "tneda/error.hpp"
#include "tneda/ordering.hpp"
#include "tneda/problems.hpp"
#include "tneda/selection.hpp"

namespace tneda {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- config

/// Fully resolved solver: model, selection and EDA loop parameters.
struct SolverSpec {
    std::string preset;  ///< empty when fully explicit
    ModelConfig model;
    SelectionPolicy selection = BoltzmannSelection{AnnealedSchedule{}, TopKPool{}};
    EdaConfig eda;
};

struct ExperimentConfig {
    Json problem;  ///< problem spec as written in the config
    std::optional<double> optimum;
    bool optimum_auto = false;
    SolverSpec solver;
    std::optional<ReferenceConfig> reference;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output = "results";
    /// Directory relative problem files are resolved against.
    std::filesystem::path base_dir = ".";
};

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"TN1", "TN2", "TN3", "BN1", "BN2", "GA1", "GA2"};
    return names;
}

/// The fixed solver matrix. Population 1000 except the PROTES-style TN3
/// (10 kept of 100 generated); chi 2, lr 0.15, one sweep with one gradient
/// step; budget 60000; annealed temperature with T0 from the initial costs.
inline SolverSpec preset(const std::string& name) {
    SolverSpec s;
    s.preset = name;
    s.model.train.chi_max = 2;
    s.model.train.learning_rate = 0.15;
    s.model.train.sweeps = 1;
    s.model.train.grad_steps_per_pair = 1;
    s.model.train.svd_cutoff = 1e-6;
    s.model.train.fresh_init = true;
    s.eda.initial_population = 1000;
    s.eda.n_parents = 1000;
    s.eda.n_children = 1000;
    s.eda.call_budget = 60000;
    s.eda.generations = 300;
    s.eda.mutation_rate = 0.0;
    s.eda.population_update = PopulationUpdate::AppendToBank;
    s.eda.elitism = true;
    const BoltzmannSelection annealed_top{AnnealedSchedule{std::nullopt, 60}, TopKPool{1000}};

    if (name == "TN1") {
        s.model.kind = ModelKind::BornMachine;
        s.selection = annealed_top;
        s.eda.mutation_rate = 0.01;
    } else if (name == "TN2") {
        s.model.kind = ModelKind::BornMachine;
        s.selection = BoltzmannSelection{AnnealedSchedule{std::nullopt, 60}, AllUniquePool{}};
    } else if (name == "TN3") {
        s.model.kind = ModelKind::PositiveMps;
        s.model.train.fresh_init = false;
        s.selection = GreedySelection{10};
        s.eda.initial_population = 100;
        s.eda.n_parents = 10;
        s.eda.n_children = 100;
        s.eda.generations = 2000;
        s.eda.population_update = PopulationUpdate::ReplaceWithNewUnique;
        s.eda.elitism = false;
    } else if (name == "BN1") {
        s.model.kind = ModelKind::ChainBayes;
        s.selection = annealed_top;
        s.eda.mutation_rate = 0.01;
    } else if (name == "BN2") {
        s.model.kind = ModelKind::ChainBayes;
        s.selection = TournamentSelection{3};
        s.eda.population_update = PopulationUpdate::ReplaceWithNewUnique;
    } else if (name == "GA1") {
        s.model.kind = ModelKind::GeneticAlgorithm;
        s.selection = annealed_top;
        s.eda.mutation_rate = 0.01;
    } else if (name == "GA2") {
        s.model.kind = ModelKind::GeneticAlgorithm;
        s.selection = TournamentSelection{3};
        s.eda.population_update = PopulationUpdate::ReplaceWithNewUnique;
    } else {
        throw ConfigError("unknown solver preset '" + name + "' (expected TN1, TN2, TN3, BN1, BN2, GA1 or GA2)");
    }
    return s;
}

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_as(const Json& obj, const std::string& key, const std::string& where) {
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": key '" + key + "' is missing or has the wrong type");
    }
}

template <typename T>
void maybe(const Json& obj, const std::string& key, T& out, const std::string& where) {
    if (obj.contains(key)) out = get_as<T>(obj, key, where);
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "born_machine") return ModelKind::BornMachine;
    if (s == "positive_mps") return ModelKind::PositiveMps;
    if (s == "chain_bayes") return ModelKind::ChainBayes;
    if (s == "genetic_algorithm") return ModelKind::GeneticAlgorithm;
    throw ConfigError("unknown model '" + s + "'");
}

inline void apply_model_fields(const Json& j, ModelConfig& m, const std::string& where) {
    if (j.contains("model")) m.kind = model_kind_from_string(get_as<std::string>(j, "model", where));
    maybe(j, "chi_max", m.train.chi_max, where);
    maybe(j, "learning_rate", m.train.learning_rate, where);
    maybe(j, "sweeps", m.train.sweeps, where);
    maybe(j, "grad_steps", m.train.grad_steps_per_pair, where);
    maybe(j, "svd_cutoff", m.train.svd_cutoff, where);
    maybe(j, "fresh_init", m.train.fresh_init, where);
    maybe(j, "alpha_noise", m.alpha_noise, where);
    maybe(j, "bayes_smoothing", m.bayes_smoothing, where);
}

inline const std::set<std::string> kModelKeys{"model",      "chi_max",     "learning_rate",  "sweeps",
                                              "grad_steps", "svd_cutoff",  "fresh_init",     "alpha_noise",
                                              "bayes_smoothing"};

/// Applies explicit solver fields on top of `s` (a preset or the defaults).
inline void apply_solver_fields(const Json& j, SolverSpec& s) {
    const std::string where = "solver";
    std::set<std::string> allowed = kModelKeys;
    allowed.insert({"preset", "selection", "temperature", "t0", "t_max", "rank", "ratio", "fixed_temperature", "pool",
                    "pool_k", "arity", "greedy_k", "initial_population", "n_parents", "n_children", "generations",
                    "mutation_rate", "call_budget", "population_update", "elitism"});
    check_keys(j, allowed, where);
    apply_model_fields(j, s.model, where);

    std::string sel = std::visit(
        [](const auto& p) -> std::string {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, BoltzmannSelection>) return "boltzmann";
            else if constexpr (std::is_same_v<P, TournamentSelection>) return "tournament";
            else return "greedy";
        },
        s.selection);
    maybe(j, "selection", sel, where);
    if (sel == "boltzmann") {
        BoltzmannSelection b;
        if (const auto* cur = std::get_if<BoltzmannSelection>(&s.selection)) b = *cur;
        std::string temp = std::holds_alternative<AnnealedSchedule>(b.schedule)       ? "annealed"
                           : std::holds_alternative<AdaptiveGapSchedule>(b.schedule) ? "adaptive"
                                                                                      : "fixed";
        maybe(j, "temperature", temp, where);
        if (temp == "annealed") {
            AnnealedSchedule a;
            if (const auto* cur = std::get_if<AnnealedSchedule>(&b.schedule)) a = *cur;
            if (j.contains("t0")) a.t0 = get_as<double>(j, "t0", where);
            maybe(j, "t_max", a.t_max, where);
            b.schedule = a;
        } else if (temp == "adaptive") {
            AdaptiveGapSchedule a;
            if (const auto* cur = std::get_if<AdaptiveGapSchedule>(&b.schedule)) a = *cur;
            maybe(j, "rank", a.rank, where);
            maybe(j, "ratio", a.ratio, where);
            b.schedule = a;
        } else if (temp == "fixed") {
            FixedSchedule f;
            maybe(j, "fixed_temperature", f.temperature, where);
            b.schedule = f;
        } else {
            throw ConfigError("solver: unknown temperature schedule '" + temp + "'");
        }
        std::string pool = std::holds_alternative<TopKPool>(b.pool) ? "top_k" : "all_unique";
        maybe(j, "pool", pool, where);
        if (pool == "top_k") {
            TopKPool t;
            if (const auto* cur = std::get_if<TopKPool>(&b.pool)) t = *cur;
            maybe(j, "pool_k", t.k, where);
            b.pool = t;
        } else if (pool == "all_unique") {
            b.pool = AllUniquePool{};
        } else {
            throw ConfigError("solver: unknown pool '" + pool + "'");
        }
        s.selection = b;
    } else if (sel == "tournament") {
        TournamentSelection t;
        if (const auto* cur = std::get_if<TournamentSelection>(&s.selection)) t = *cur;
        maybe(j, "arity", t.arity, where);
        s.selection = t;
    } else if (sel == "greedy") {
        GreedySelection g;
        if (const auto* cur = std::get_if<GreedySelection>(&s.selection)) g = *cur;
        maybe(j, "greedy_k", g.k, where);
        s.selection = g;
    } else {
        throw ConfigError("solver: unknown selection '" + sel + "'");
    }

    maybe(j, "initial_population", s.eda.initial_population, where);
    maybe(j, "n_parents", s.eda.n_parents, where);
    maybe(j, "n_children", s.eda.n_children, where);
    maybe(j, "generations", s.eda.generations, where);
    maybe(j, "mutation_rate", s.eda.mutation_rate, where);
    maybe(j, "call_budget", s.eda.call_budget, where);
    maybe(j, "elitism", s.eda.elitism, where);
    if (j.contains("population_update")) {
        const auto u = get_as<std::string>(j, "population_update", where);
        if (u == "append") s.eda.population_update = PopulationUpdate::AppendToBank;
        else if (u == "replace") s.eda.population_update = PopulationUpdate::ReplaceWithNewUnique;
        else throw ConfigError("solver: population_update must be 'append' or 'replace'");
    }
}

} // namespace detail

/// Parses "a..b" (inclusive) or a single integer.
inline std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
    auto to_u64 = [&](const std::string& s) -> std::uint64_t {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("bad seed range '" + text + "' (expected a..b)");
        return std::stoull(s);
    };
    const auto dots = text.find("..");
    if (dots == std::string::npos) return {to_u64(text)};
    const std::uint64_t a = to_u64(text.substr(0, dots)), b = to_u64(text.substr(dots + 2));
    if (a > b) throw ConfigError("bad seed range '" + text + "': start exceeds end");
    if (b - a >= 1000000) throw ConfigError("seed range '" + text + "' is too large");
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    return out;
}

inline ExperimentConfig parse_experiment_config(const Json& j, const std::filesystem::path& base_dir = ".") {
    detail::check_keys(j, {"problem", "optimum", "solver", "reference", "seeds", "output"}, "config");
    ExperimentConfig cfg;
    cfg.base_dir = base_dir;
    if (!j.contains("problem")) throw ConfigError("config: missing 'problem'");
    cfg.problem = j.at("problem");
    if (!cfg.problem.is_object() || !cfg.problem.contains("kind"))
        throw ConfigError("config: 'problem' must be an object with a 'kind'");

    if (j.contains("optimum")) {
        const auto& o = j.at("optimum");
        if (o.is_number()) cfg.optimum = o.get<double>();
        else if (o == "auto") cfg.optimum_auto = true;
        else throw ConfigError("config: 'optimum' must be a number or \"auto\"");
    }

    const Json solver = j.value("solver", Json::object());
    if (!solver.is_object()) throw ConfigError("config: 'solver' must be an object");
    if (solver.contains("preset")) cfg.solver = preset(detail::get_as<std::string>(solver, "preset", "solver"));
    detail::apply_solver_fields(solver, cfg.solver);

    if (j.contains("reference")) {
        const auto& r = j.at("reference");
        auto allowed = detail::kModelKeys;
        allowed.insert({"p_flip", "mirror_rng"});
        detail::check_keys(r, allowed, "reference");
        ReferenceConfig ref;
        ref.model = cfg.solver.model;
        detail::apply_model_fields(r, ref.model, "reference");
        detail::maybe(r, "p_flip", ref.p_flip, "reference");
        detail::maybe(r, "mirror_rng", ref.mirror_rng, "reference");
        if (!(ref.p_flip >= 0.0 && ref.p_flip <= 1.0)) throw ConfigError("reference: p_flip outside [0, 1]");
        cfg.reference = ref;
    }

    if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        if (s.is_string()) cfg.seeds = parse_seed_range(s.get<std::string>());
        else if (s.is_array())
            for (const auto& v : s) {
                if (!v.is_number_unsigned()) throw ConfigError("config: seeds must be nonnegative integers");
                cfg.seeds.push_back(v.get<std::uint64_t>());
            }
        else throw ConfigError("config: 'seeds' must be a list or an \"a..b\" range");
    } else {
        cfg.seeds = {0};
    }
    if (j.contains("output")) cfg.output = detail::get_as<std::string>(j, "output", "config");

    try {
        cfg.solver.eda.validate();
        cfg.solver.model.train.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    Json j;
    try {
        j = Json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_experiment_config(j, path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------- problem construction

/// Builds the objective from a problem spec. Supported kinds:
///   onemax {n}; trap {n, k}; knapsack {file} | {n, seed};
///   maxsat {file} | {n_vars, n_clauses, seed};
///   portfolio {file, csv: covariance|returns, header} | {n, seed}, plus n_min, n_max, penalty,
///   ordering: natural|ward.
inline Problem build_problem(const Json& spec, const std::filesystem::path& base_dir = ".") {
    const std::string where = "problem";
    const auto kind = detail::get_as<std::string>(spec, "kind", where);
    auto file = [&]() { return read_text_file(base_dir / detail::get_as<std::string>(spec, "file", where)); };
    auto u = [&](const std::string& key) { return detail::get_as<std::size_t>(spec, key, where); };
    auto seed = [&]() { return spec.contains("seed") ? detail::get_as<std::uint64_t>(spec, "seed", where) : 0; };

    if (kind == "onemax") {
        detail::check_keys(spec, {"kind", "n"}, where);
        return onemax(u("n"));
    }
    if (kind == "trap") {
        detail::check_keys(spec, {"kind", "n", "k"}, where);
        return deceptive_trap(u("n"), spec.contains("k") ? u("k") : 4);
    }
    if (kind == "knapsack") {
        detail::check_keys(spec, {"kind", "file", "n", "seed"}, where);
        return make_problem(spec.contains("file") ? parse_knapsack(file()) : random_knapsack(u("n"), seed()));
    }
    if (kind == "maxsat") {
        detail::check_keys(spec, {"kind", "file", "n_vars", "n_clauses", "seed"}, where);
        return make_problem(spec.contains("file") ? parse_dimacs_cnf(file())
                                                  : random_3sat(u("n_vars"), u("n_clauses"), seed()));
    }
    if (kind == "portfolio") {
        detail::check_keys(spec, {"kind", "file", "csv", "header", "n", "seed", "n_min", "n_max", "penalty", "ordering"},
                           where);
        const double penalty = spec.contains("penalty") ? detail::get_as<double>(spec, "penalty", where) : 100.0;
        PortfolioProblem p;
        if (spec.contains("file")) {
            const std::string csv = spec.value("csv", std::string("covariance"));
            if (csv != "covariance" && csv != "returns") throw ConfigError("problem: csv must be covariance or returns");
            const Eigen::MatrixXd m = load_covariance_csv(file(), csv == "returns" ? CsvMode::Returns : CsvMode::Covariance,
                                                          spec.value("header", false));
            p.sigma = csv == "returns" ? sample_covariance(m) : m;
            p.n_min = u("n_min");
            p.n_max = u("n_max");
            p.penalty_c = penalty;
        } else {
            p = random_portfolio(u("n"), u("n_min"), u("n_max"), seed(), penalty);
        }
        const std::string ordering = spec.value("ordering", std::string("natural"));
        const Eigen::MatrixXd sigma = p.sigma;
        Problem base = make_problem(std::move(p));
        if (ordering == "natural") return base;
        if (ordering == "ward") return permuted(base, ward_order_from_covariance(sigma));
        throw ConfigError("problem: ordering must be natural or ward");
    }
    throw ConfigError("problem: unknown kind '" + kind + "'");
}

/// Attaches the configured optimum; "auto" uses dynamic programming for
/// knapsack files and exhaustive search for other problems up to 24 bits.
inline void resolve_optimum(const ExperimentConfig& cfg, Problem& problem) {
    if (cfg.optimum) {
        problem.set_optimum(cfg.optimum);
        return;
    }
    if (!cfg.optimum_auto || problem.optimum()) return;
    const auto kind = cfg.problem.at("kind").get<std::string>();
    if (kind == "knapsack") {
        const KnapsackProblem k = cfg.problem.contains("file")
                                      ? parse_knapsack(read_text_file(cfg.base_dir / cfg.problem.at("file").get<std::string>()))
                                      : random_knapsack(cfg.problem.at("n").get<std::size_t>(), cfg.problem.value("seed", std::uint64_t{0}));
        problem.set_optimum(knapsack_dp_optimum(k).second);
        return;
    }
    if (problem.dimension() > 24)
        throw ConfigError("optimum \"auto\" needs exhaustive search; dimension " + std::to_string(problem.dimension()) +
                          " exceeds 24");
    problem.set_optimum(brute_force_optimum(problem).second);
}

// ---------------------------------------------------------------- records

namespace detail {

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

} // namespace detail

/// One JSON object per generation. Non-finite numbers are written as null;
/// wall_time is the only nondeterministic field and always comes last.
inline Json record_json(std::uint64_t seed, const RunRecord& r, const std::optional<double>& optimum,
                        const KlReport* kl, double wall_time) {
    Json j;
    j["seed"] = seed;
    j["generation"] = r.generation;
    j["calls"] = r.calls;
    j["best"] = detail::finite_or_null(r.best);
    j["relative_error"] = optimum ? detail::finite_or_null(relative_error(r.best, *optimum)) : Json(nullptr);
    j["median"] = detail::finite_or_null(r.median);
    j["temperature"] = detail::finite_or_null(r.temperature);
    j["new_unique"] = r.new_unique;
    j["budget_exhausted"] = r.budget_exhausted;
    j["best_x"] = r.best_x;
    if (kl) {
        j["kl_primary"] = detail::finite_or_null(kl->kl_primary.value);
        j["kl_primary_zero_support"] = kl->kl_primary.zero_support;
        j["kl_reference"] = detail::finite_or_null(kl->kl_reference.value);
        j["kl_reference_zero_support"] = kl->kl_reference.zero_support;
        j["kl_delta"] = detail::finite_or_null(kl->delta());
    }
    j["wall_time"] = wall_time;
    return j;
}

/// Checks the fields every record must carry; returns an error message or empty.
inline std::string validate_record(const Json& j) {
    if (!j.is_object()) return "record is not an object";
    for (const char* key : {"seed", "generation", "calls", "new_unique"})
        if (!j.contains(key) || !j.at(key).is_number_unsigned()) return std::string("missing or non-integer '") + key + "'";
    for (const char* key : {"best", "relative_error", "median", "temperature"})
        if (!j.contains(key) || !(j.at(key).is_number() || j.at(key).is_null()))
            return std::string("missing or non-numeric '") + key + "'";
    if (!j.contains("budget_exhausted") || !j.at("budget_exhausted").is_boolean()) return "missing 'budget_exhausted'";
    if (!j.contains("best_x") || !j.at("best_x").is_string()) return "missing 'best_x'";
    if (!j.contains("wall_time") || !j.at("wall_time").is_number()) return "missing 'wall_time'";
    return {};
}

inline std::filesystem::path run_file(const std::filesystem::path& dir, std::uint64_t seed) {
    return dir / ("run_" + std::to_string(seed) + ".jsonl");
}

/// Serializes file writes from concurrent workers.
class RecordSink {
public:
    explicit RecordSink(std::filesystem::path dir) : dir_(std::move(dir)) {}

    void write_run(std::uint64_t seed, const std::string& lines) {
        std::lock_guard lock(mutex_);
        const auto path = run_file(dir_, seed);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << lines;
        if (!out) throw IoError("write failed for '" + path.string() + "'");
    }

private:
    std::filesystem::path dir_;
    std::mutex mutex_;
};

/// Runs a single seed and returns its JSON-lines text.
inline std::string run_seed(const ExperimentConfig& cfg, const Problem& problem, std::uint64_t seed) {
    Rng rng(seed);
    const auto start = std::chrono::steady_clock::now();
    std::vector<RunRecord> records;
    std::vector<KlReport> kl;
    if (cfg.reference) {
        auto run = run_with_reference(problem, cfg.solver.model, cfg.solver.selection, cfg.solver.eda, *cfg.reference, rng);
        records = std::move(run.records);
        kl = std::move(run.kl);
    } else {
        records = run_eda(problem, cfg.solver.model, cfg.solver.selection, cfg.solver.eda, rng);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string out;
    for (const auto& r : records) {
        const KlReport* k = nullptr;
        for (const auto& rep : kl)
            if (rep.generation == r.generation) k = &rep;
        out += record_json(seed, r, problem.optimum(), k, wall).dump() + "\n";
    }
    return out;
}

// ---------------------------------------------------------------- summary

/// Linear-interpolation quantile (type 7) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    detail::require(!sorted.empty(), "quantile: empty data");
    detail::require(q >= 0.0 && q <= 1.0, "quantile: q outside [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct SummaryStats {
    std::size_t n = 0;
    double median = 0, q1 = 0, q3 = 0, mean = 0;
    /// Sample standard deviation / sqrt(n); 0 for a single value.
    double stderr_ = 0;
};

/// Order statistics are taken on sorted data and the mean is summed in sorted
/// order, so the result does not depend on the order of the inputs.
inline SummaryStats summary_stats(std::vector<double> v) {
    detail::require(!v.empty(), "summary_stats: empty data");
    std::sort(v.begin(), v.end());
    SummaryStats s;
    s.n = v.size();
    s.median = quantile_sorted(v, 0.5);
    s.q1 = quantile_sorted(v, 0.25);
    s.q3 = quantile_sorted(v, 0.75);
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    }
    return s;
}

/// One run's trajectory: per generation the call count and the summarized metric.
struct Series {
    std::vector<std::size_t> calls;
    std::vector<double> values;
};

struct SummaryRow {
    std::size_t generation;
    double calls_median;
    SummaryStats stats;
};

/// Per-generation statistics across runs. A run that stopped early carries its
/// final value forward so every generation summarizes all runs.
inline std::vector<SummaryRow> summarize_series(const std::vector<Series>& runs) {
    if (runs.empty()) throw DomainError("summarize: no runs");
    std::size_t len = 0;
    for (const auto& r : runs) {
        if (r.values.empty() || r.values.size() != r.calls.size()) throw DomainError("summarize: empty or ragged run");
        len = std::max(len, r.values.size());
    }
    std::vector<SummaryRow> out;
    for (std::size_t g = 0; g < len; ++g) {
        std::vector<double> v, c;
        for (const auto& r : runs) {
            const std::size_t i = std::min(g, r.values.size() - 1);
            v.push_back(r.values[i]);
            c.push_back(static_cast<double>(r.calls[i]));
        }
        std::sort(c.begin(), c.end());
        out.push_back({g, quantile_sorted(c, 0.5), summary_stats(std::move(v))});
    }
    return out;
}

/// Reads every run_*.jsonl in `dir` (sorted by name). The metric is the
/// relative error when every record has one, else the best objective.
inline std::pair<std::vector<Series>, std::string> load_series(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: '" + dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("run_") && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DomainError("summarize: no run_*.jsonl files in '" + dir.string() + "'");

    std::vector<std::vector<Json>> parsed;
    bool have_relative = true;
    for (const auto& f : files) {
        std::istringstream in(read_text_file(f));
        std::vector<Json> recs;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            Json j;
            try {
                j = Json::parse(line);
            } catch (const nlohmann::json::parse_error& e) {
                throw ParseError(f.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            if (auto err = validate_record(j); !err.empty())
                throw ParseError(f.string() + ":" + std::to_string(line_no) + ": " + err);
            if (j.at("relative_error").is_null()) have_relative = false;
            recs.push_back(std::move(j));
        }
        if (recs.empty()) throw ParseError(f.string() + ": no records");
        parsed.push_back(std::move(recs));
    }
    const std::string metric = have_relative ? "relative_error" : "best";
    std::vector<Series> out;
    for (const auto& recs : parsed) {
        Series s;
        for (const auto& j : recs) {
            s.calls.push_back(j.at("calls").get<std::size_t>());
            const auto& v = j.at(metric);
            s.values.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
        }
        out.push_back(std::move(s));
    }
    return {std::move(out), metric};
}

/// CSV columns: generation, runs, calls_median, metric, median, q1, q3, mean, stderr.
inline std::string summary_csv(const std::vector<SummaryRow>& rows, const std::string& metric) {
    // Shortest text that round-trips to the same double.
    auto num = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    std::string out = "generation,runs,calls_median,metric,median,q1,q3,mean,stderr\n";
    for (const auto& r : rows)
        out += std::to_string(r.generation) + ',' + std::to_string(r.stats.n) + ',' + num(r.calls_median) + ',' + metric +
               ',' + num(r.stats.median) + ',' + num(r.stats.q1) + ',' + num(r.stats.q3) + ',' + num(r.stats.mean) + ',' +
               num(r.stats.stderr_) + '\n';
    return out;
}

inline void summarize_directory(const std::filesystem::path& in_dir, const std::filesystem::path& out_file) {
    const auto [series, metric] = load_series(in_dir);
    const std::string csv = summary_csv(summarize_series(series), metric);
    std::ofstream out(out_file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + out_file.string() + "'");
    out << csv;
}

// ---------------------------------------------------------------- driver

/// Runs every seed (on `jobs` worker threads), writes run_<seed>.jsonl files
/// and then summary.csv (over all run files present) into cfg.output.
inline void run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
    if (cfg.seeds.empty()) throw ConfigError("no seeds to run");
    Problem problem = build_problem(cfg.problem, cfg.base_dir);
    resolve_optimum(cfg, problem);

    std::error_code ec;
    std::filesystem::create_directories(cfg.output, ec);
    if (ec) throw IoError("cannot create '" + cfg.output.string() + "': " + ec.message());

    RecordSink sink(cfg.output);
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.seeds.size()) return;
            try {
                sink.write_run(cfg.seeds[i], run_seed(cfg, problem, cfg.seeds[i]));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next = cfg.seeds.size();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, cfg.seeds.size());
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < jobs; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);

    summarize_directory(cfg.output, cfg.output / "summary.csv");
}

} // namespace tneda
