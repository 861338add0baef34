#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tneda/experiment.hpp"

namespace {

const char* category_name(tneda::ErrorCategory c) {
    switch (c) {
    case tneda::ErrorCategory::Usage: return "usage";
    case tneda::ErrorCategory::Io: return "io";
    case tneda::ErrorCategory::Parse: return "parse";
    case tneda::ErrorCategory::Domain: return "domain";
    }
    return "error";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor-network EDA experiment runner"};
    app.require_subcommand(1);

    std::string config_path, seeds, out_dir;
    std::size_t jobs = 1;
    auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seeds", seeds, "Seed range a..b (inclusive); overrides the config");
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory; overrides the config");

    std::string in_dir, summary_out;
    auto* summarize = app.add_subcommand("summarize", "Summarize run_*.jsonl files into a CSV");
    summarize->add_option("--in", in_dir, "Directory of run files")->required();
    summarize->add_option("--out", summary_out, "Summary CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(tneda::ErrorCategory::Usage);
    }

    try {
        if (*run) {
            auto cfg = tneda::load_experiment_config(config_path);
            if (!seeds.empty()) cfg.seeds = tneda::parse_seed_range(seeds);
            if (!out_dir.empty()) cfg.output = out_dir;
            tneda::run_experiment(cfg, jobs);
            std::cout << "wrote " << cfg.seeds.size() << " run file(s) and summary.csv to " << cfg.output.string()
                      << "\n";
        } else {
            tneda::summarize_directory(in_dir, summary_out);
        }
    } catch (const tneda::Error& e) {
        std::cerr << "error [" << category_name(e.category()) << "]: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
