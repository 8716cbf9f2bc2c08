#include <iostream>

#include <CLI11.hpp>

#include "hes/oracles.hpp"
#include "hes/runner.hpp"

namespace {

int report(const hes::CheckSummary& summary, const std::string& label) {
    for (const hes::CheckReport& c : summary.checks)
        std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  (" << c.detail << ")\n";
    std::cout << label << ": " << summary.passed_count << "/" << summary.checks.size()
              << " passed (required " << summary.required << ") -> "
              << (summary.passed() ? "PASS" : "FAIL") << "\n";
    return summary.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"H-entropy search experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string seeds_arg;
    std::string out_arg;
    std::string acq_arg;
    auto* run_cmd = app.add_subcommand("run", "Run an experiment from a config file");
    run_cmd->add_option("--config", config_path, "Path to key = value config file")->required();
    run_cmd->add_option("--seeds", seeds_arg, "Comma-separated seed list (overrides config)");
    run_cmd->add_option("--out", out_arg, "Output directory (overrides config)");
    run_cmd->add_option("--acq", acq_arg, "Acquisition id HES|RS|US|KG|EI|POM (overrides config)");

    std::string agg_dir;
    auto* agg_cmd = app.add_subcommand("aggregate", "Aggregate trial CSVs into summary.csv");
    agg_cmd->add_option("--in", agg_dir, "Directory containing trial_*.csv")->required();

    auto* grad_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient suites");
    auto* ei_cmd = app.add_subcommand("oracle-ei", "Expected-improvement equivalence oracle");
    auto* kg_cmd = app.add_subcommand("oracle-kg", "Knowledge-gradient equivalence oracle");
    auto* pi_cmd = app.add_subcommand("oracle-pi", "Probability-of-improvement equivalence oracle");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            hes::ExperimentConfig cfg = hes::load_config(config_path);
            if (!seeds_arg.empty()) {
                cfg.seeds.clear();
                std::stringstream ss(seeds_arg);
                std::string tok;
                while (std::getline(ss, tok, ',')) cfg.seeds.push_back(std::stoull(tok));
            }
            if (!out_arg.empty()) cfg.out_dir = out_arg;
            if (!acq_arg.empty()) cfg.acquisition = hes::parse_acquisition_id(acq_arg);

            const auto trials = hes::run_experiment(cfg);
            for (const auto& trial : trials) {
                if (trial.empty()) continue;
                std::cout << "seed " << trial.front().seed << ": final "
                          << trial.back().metric_name << " = " << trial.back().metric << "\n";
            }
            std::cout << "wrote " << trials.size() << " trial file(s) to " << cfg.out_dir << "\n";
            return 0;
        }
        if (agg_cmd->parsed()) {
            const auto rows = hes::aggregate_directory(agg_dir);
            std::cout << hes::summary_csv(rows);
            return 0;
        }
        if (grad_cmd->parsed()) return report(hes::run_gradcheck(), "gradcheck");
        if (ei_cmd->parsed()) return report(hes::run_ei_oracle(), "oracle-ei");
        if (kg_cmd->parsed()) return report(hes::run_kg_oracle(), "oracle-kg");
        if (pi_cmd->parsed()) return report(hes::run_pi_oracle(), "oracle-pi");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
