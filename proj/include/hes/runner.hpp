#pragma once

#include <map>
#include <optional>
#include <string>

#include "hes/acquisition.hpp"
#include "hes/benchfuncs.hpp"

namespace hes {

enum class AcquisitionId { HES, RS, US, KG, EI, POM };

AcquisitionId parse_acquisition_id(const std::string& s);
std::string acquisition_id_name(AcquisitionId id);

// Plain-text `key = value` configuration with dotted section keys. Unknown
// keys are hard errors.
struct ExperimentConfig {
    // function
    std::string function_id = "alpine";
    std::size_t function_dim = 2;
    std::string raster_path;
    std::optional<double> noise_sd;  // default 0.01 * output range

    // loss
    std::string loss_id = "topk";
    int loss_k = 3;
    double distance_weight = 0.5;
    std::optional<double> distance_cap;  // default 2 * avg box width / k
    double temperature = 0.05;
    std::size_t mlse_grid_per_dim = 30;
    std::optional<Vector> thresholds;
    std::optional<Vector> threshold_percentiles;
    std::optional<Vector> targets;
    int target_count = 5;

    // acquisition
    AcquisitionId acquisition = AcquisitionId::HES;
    OptimizerConfig optimizer;

    // bayes-action solver
    SolverConfig solver;

    // gp
    bool gp_refit = true;
    std::optional<double> gp_lengthscale;
    double gp_signal_variance = 1.0;
    std::optional<double> gp_noise_variance;  // default: blackbox noise_sd^2
    bool gp_per_dimension_lengthscale = false;

    // runner
    int iterations = 30;               // T
    std::optional<int> n_init;         // default 2d + 2
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::string out_dir = "out";
    int threads = 1;
    std::size_t candidate_count = 10000;  // US / POM / EI argmax set
    bool record_wall_time = false;        // keeps default CSV output reproducible
};

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);

// One row of the experiment log.
struct TrialRecord {
    std::uint64_t seed = 0;
    int iteration = 0;
    Vector x;
    double y = 0.0;
    Vector action;
    double metric = 0.0;
    std::string metric_name;
    double wall_time_s = 0.0;
};

// The instantiated problem: black box, terminal decision problem, metric
// machinery. Built once per run from the config.
struct ProblemSetup {
    BlackBox blackbox;
    std::unique_ptr<LossSpec> loss;
    std::unique_ptr<LossSpec> neg_value;  // KG route
    Vector thresholds;                    // mlse / POM
    Matrix mlse_grid;                     // loss grid (empty unless mlse)
    double noise_sd = 0.0;
};

ProblemSetup build_problem(const ExperimentConfig& cfg);

// Fraction of grid points whose posterior-mean threshold labels match the
// true labels, averaged across thresholds.
double mlse_accuracy(const GpPosterior& gp, const MultiLevelSetHyper& hyper,
                     const std::function<double(const Vector&)>& f_true);

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const ProblemSetup& setup,
                                   std::uint64_t seed);

struct SummaryRow {
    int iteration = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    int n_seeds = 0;
};

std::vector<SummaryRow> aggregate(const std::vector<std::vector<TrialRecord>>& trials);

std::string trial_csv(const std::vector<TrialRecord>& records, bool record_wall_time);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// Runs every seed (trials in parallel when cfg.threads > 1), writes one
// trial_seed<seed>.csv per seed plus summary.csv, returns all records.
std::vector<std::vector<TrialRecord>> run_experiment(const ExperimentConfig& cfg);

// `aggregate --in <dir>`: re-reads trial CSVs and rewrites summary.csv.
std::vector<SummaryRow> aggregate_directory(const std::string& dir);

}  // namespace hes
