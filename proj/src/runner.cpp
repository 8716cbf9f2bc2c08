#include "hes/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "hes/errors.hpp"

namespace hes {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double percentile(Vector values, double p) {
    std::sort(values.begin(), values.end());
    const double pos = p / 100.0 * (values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - lo;
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::size_t range_grid_per_dim(std::size_t d) {
    switch (d) {
        case 1: return 1001;
        case 2: return 101;
        case 3: return 22;
        default: return 10;
    }
}

}  // namespace

AcquisitionId parse_acquisition_id(const std::string& s) {
    if (s == "HES") return AcquisitionId::HES;
    if (s == "RS") return AcquisitionId::RS;
    if (s == "US") return AcquisitionId::US;
    if (s == "KG") return AcquisitionId::KG;
    if (s == "EI") return AcquisitionId::EI;
    if (s == "POM") return AcquisitionId::POM;
    throw ConfigError("unknown acquisition id: " + s + " (expected HES|RS|US|KG|EI|POM)");
}

std::string acquisition_id_name(AcquisitionId id) {
    switch (id) {
        case AcquisitionId::HES: return "HES";
        case AcquisitionId::RS: return "RS";
        case AcquisitionId::US: return "US";
        case AcquisitionId::KG: return "KG";
        case AcquisitionId::EI: return "EI";
        case AcquisitionId::POM: return "POM";
    }
    return "?";
}

namespace {

struct KeyValue {
    std::string value;
    std::string origin;
    bool used = false;
};

double parse_double_value(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

int parse_int_value(const std::string& key, const std::string& v) {
    const double d = parse_double_value(key, v);
    if (d != std::floor(d)) throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(d);
}

bool parse_bool_value(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

Vector parse_list_value(const std::string& key, const std::string& v) {
    Vector out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_double_value(key, tok));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    std::map<std::string, KeyValue> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line.substr(0, line.find('#')));
        if (stripped.empty()) continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        kv[key] = {value, origin + ":" + std::to_string(lineno)};
    }

    ExperimentConfig cfg;
    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    };

    if (auto v = take("function.id")) cfg.function_id = *v;
    if (auto v = take("function.dim")) cfg.function_dim = parse_int_value("function.dim", *v);
    if (auto v = take("function.raster_path")) cfg.raster_path = *v;
    if (auto v = take("function.noise_sd")) cfg.noise_sd = parse_double_value("function.noise_sd", *v);

    if (auto v = take("loss.id")) cfg.loss_id = *v;
    if (auto v = take("loss.k")) cfg.loss_k = parse_int_value("loss.k", *v);
    if (auto v = take("loss.distance_weight"))
        cfg.distance_weight = parse_double_value("loss.distance_weight", *v);
    if (auto v = take("loss.distance_cap"))
        cfg.distance_cap = parse_double_value("loss.distance_cap", *v);
    if (auto v = take("loss.temperature"))
        cfg.temperature = parse_double_value("loss.temperature", *v);
    if (auto v = take("loss.grid_per_dim"))
        cfg.mlse_grid_per_dim = parse_int_value("loss.grid_per_dim", *v);
    if (auto v = take("loss.thresholds")) cfg.thresholds = parse_list_value("loss.thresholds", *v);
    if (auto v = take("loss.threshold_percentiles"))
        cfg.threshold_percentiles = parse_list_value("loss.threshold_percentiles", *v);
    if (auto v = take("loss.targets")) cfg.targets = parse_list_value("loss.targets", *v);
    if (auto v = take("loss.target_count"))
        cfg.target_count = parse_int_value("loss.target_count", *v);

    if (auto v = take("acquisition.id")) cfg.acquisition = parse_acquisition_id(*v);
    if (auto v = take("acquisition.n_fantasies"))
        cfg.optimizer.n_fantasies = parse_int_value("acquisition.n_fantasies", *v);
    if (auto v = take("acquisition.n_samples"))
        cfg.optimizer.n_samples = parse_int_value("acquisition.n_samples", *v);
    if (auto v = take("acquisition.restarts"))
        cfg.optimizer.restarts = parse_int_value("acquisition.restarts", *v);
    if (auto v = take("acquisition.steps"))
        cfg.optimizer.steps = parse_int_value("acquisition.steps", *v);
    if (auto v = take("acquisition.step_size"))
        cfg.optimizer.step_size = parse_double_value("acquisition.step_size", *v);

    if (auto v = take("solver.restarts")) cfg.solver.restarts = parse_int_value("solver.restarts", *v);
    if (auto v = take("solver.steps")) cfg.solver.steps = parse_int_value("solver.steps", *v);
    if (auto v = take("solver.step_size"))
        cfg.solver.step_size = parse_double_value("solver.step_size", *v);
    if (auto v = take("solver.n_samples"))
        cfg.solver.n_samples = parse_int_value("solver.n_samples", *v);

    if (auto v = take("gp.refit")) cfg.gp_refit = parse_bool_value("gp.refit", *v);
    if (auto v = take("gp.lengthscale"))
        cfg.gp_lengthscale = parse_double_value("gp.lengthscale", *v);
    if (auto v = take("gp.signal_variance"))
        cfg.gp_signal_variance = parse_double_value("gp.signal_variance", *v);
    if (auto v = take("gp.noise_variance"))
        cfg.gp_noise_variance = parse_double_value("gp.noise_variance", *v);
    if (auto v = take("gp.per_dimension_lengthscale"))
        cfg.gp_per_dimension_lengthscale = parse_bool_value("gp.per_dimension_lengthscale", *v);

    if (auto v = take("runner.T")) cfg.iterations = parse_int_value("runner.T", *v);
    if (auto v = take("runner.n_init")) cfg.n_init = parse_int_value("runner.n_init", *v);
    if (auto v = take("runner.seeds")) {
        cfg.seeds.clear();
        for (double s : parse_list_value("runner.seeds", *v))
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (auto v = take("runner.out_dir")) cfg.out_dir = *v;
    if (auto v = take("runner.threads")) cfg.threads = parse_int_value("runner.threads", *v);
    if (auto v = take("runner.candidates"))
        cfg.candidate_count = parse_int_value("runner.candidates", *v);
    if (auto v = take("runner.record_wall_time"))
        cfg.record_wall_time = parse_bool_value("runner.record_wall_time", *v);

    for (const auto& [key, val] : kv)
        if (!val.used)
            throw ConfigError(val.origin + ": unknown config key '" + key + "'");

    if (cfg.iterations < 1) throw ConfigError("runner.T must be >= 1");
    if (cfg.seeds.empty()) throw ConfigError("runner.seeds must be non-empty");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

ProblemSetup build_problem(const ExperimentConfig& cfg) {
    // Black box first (noise defaults depend on its output range).
    std::optional<BlackBox> bb;
    if (cfg.function_id == "alpine") {
        bb = make_alpine_blackbox(cfg.function_dim, 0.0);
    } else if (cfg.function_id == "multihills") {
        bb = make_multihills_blackbox(0.0);
    } else if (cfg.function_id == "raster") {
        if (cfg.raster_path.empty())
            throw ConfigError("function.raster_path required for function.id = raster");
        bb = make_raster_blackbox(load_raster_csv(cfg.raster_path), 0.0);
    } else {
        throw ConfigError("unknown function.id: " + cfg.function_id);
    }
    const std::size_t d = bb->box().dim();
    const std::size_t per_dim = range_grid_per_dim(d);
    const BlackBox::Range range = bb->output_range(per_dim);
    const double noise_sd = cfg.noise_sd.value_or(0.01 * range.span());
    BlackBox blackbox(bb->truth(), bb->box(), noise_sd);

    ProblemSetup setup{std::move(blackbox), nullptr, nullptr, {}, {}, noise_sd};
    setup.neg_value = make_neg_value_loss(d);

    if (cfg.loss_id == "topk") {
        TopKDiversityHyper h;
        h.k = cfg.loss_k;
        h.distance_weight = cfg.distance_weight;
        double avg_width = 0.0;
        for (std::size_t c = 0; c < d; ++c) avg_width += setup.blackbox.box().width(c);
        avg_width /= d;
        h.distance_cap = cfg.distance_cap.value_or(2.0 * avg_width / std::max(1, cfg.loss_k));
        setup.loss = make_topk_diversity_loss(h, d);
    } else if (cfg.loss_id == "kguesses") {
        KGuessesHyper h;
        h.k = cfg.loss_k;
        h.temperature = cfg.temperature;
        setup.loss = make_k_guesses_loss(h, d);
    } else if (cfg.loss_id == "mlse") {
        if (d != 2 && cfg.mlse_grid_per_dim > 12)
            throw ConfigError("mlse loss grids above 12 per dim are only supported in 2-D");
        MultiLevelSetHyper h;
        h.grid = regular_grid(setup.blackbox.box(), cfg.mlse_grid_per_dim);
        Vector grid_vals(h.grid.rows());
        {
            Vector x(d);
            for (std::size_t i = 0; i < h.grid.rows(); ++i) {
                for (std::size_t c = 0; c < d; ++c) x[c] = h.grid(i, c);
                grid_vals[i] = setup.blackbox.eval_true(x);
            }
        }
        if (cfg.thresholds) {
            h.thresholds = *cfg.thresholds;
        } else {
            Vector pcts = cfg.threshold_percentiles.value_or(Vector{60.0, 85.0});
            for (double p : pcts) h.thresholds.push_back(percentile(grid_vals, p));
        }
        setup.thresholds = h.thresholds;
        setup.mlse_grid = h.grid;
        setup.loss = make_mlse_loss(std::move(h));
    } else if (cfg.loss_id == "sequence") {
        SequenceHyper h;
        if (cfg.targets) {
            h.targets = *cfg.targets;
        } else {
            // target_count values spanning the output range, strictly interior.
            const int m = cfg.target_count;
            if (m < 1) throw ConfigError("loss.target_count must be >= 1");
            for (int i = 0; i < m; ++i)
                h.targets.push_back(range.min + (i + 1) * range.span() / (m + 1));
        }
        setup.loss = make_sequence_loss(std::move(h), d);
    } else if (cfg.loss_id == "negvalue") {
        setup.loss = make_neg_value_loss(d);
    } else {
        throw ConfigError("unknown loss.id: " + cfg.loss_id);
    }

    if (cfg.acquisition == AcquisitionId::POM && setup.thresholds.empty())
        throw ConfigError("POM acquisition requires the mlse loss (thresholds)");
    return setup;
}

double mlse_accuracy(const GpPosterior& gp, const MultiLevelSetHyper& hyper,
                     const std::function<double(const Vector&)>& f_true) {
    const std::size_t j = hyper.grid.rows();
    if (j == 0) throw std::invalid_argument("mlse_accuracy: empty grid");
    double total = 0.0;
    Vector x(hyper.grid.cols());
    Vector means(j), truths(j);
    for (std::size_t i = 0; i < j; ++i) {
        for (std::size_t c = 0; c < x.size(); ++c) x[c] = hyper.grid(i, c);
        means[i] = gp.predict(x).mean;
        truths[i] = f_true(x);
    }
    for (double c : hyper.thresholds) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < j; ++i)
            if ((means[i] > c) == (truths[i] > c)) ++correct;
        total += static_cast<double>(correct) / j;
    }
    return total / hyper.thresholds.size();
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const ProblemSetup& setup,
                                   std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();
    const Box& box = setup.blackbox.box();
    const std::size_t d = box.dim();
    RngStream root(seed);
    RngStream noise_rng = root.fork(1);
    RngStream init_rng = root.fork(2);
    RngStream rs_rng = root.fork(3);

    const int n_init = cfg.n_init.value_or(static_cast<int>(2 * d + 2));
    Dataset data;
    data.inputs = Matrix(n_init, d);
    data.outputs.resize(n_init);
    for (int i = 0; i < n_init; ++i) {
        Vector x(d);
        for (std::size_t c = 0; c < d; ++c) x[c] = init_rng.uniform(box.lo[c], box.hi[c]);
        for (std::size_t c = 0; c < d; ++c) data.inputs(i, c) = x[c];
        data.outputs[i] = setup.blackbox.eval_noisy(x, noise_rng);
    }

    std::vector<Vector> candidates;
    if (cfg.acquisition == AcquisitionId::US || cfg.acquisition == AcquisitionId::POM ||
        cfg.acquisition == AcquisitionId::EI)
        candidates = halton_points(cfg.candidate_count, box.lo, box.hi);

    double avg_width = 0.0;
    for (std::size_t c = 0; c < d; ++c) avg_width += box.width(c);
    avg_width /= d;
    const double gp_noise = cfg.gp_noise_variance.value_or(setup.noise_sd * setup.noise_sd);
    const KernelParams fixed_params = KernelParams::isotropic(
        d, cfg.gp_lengthscale.value_or(0.1 * avg_width), cfg.gp_signal_variance, gp_noise);

    MultiLevelSetHyper mlse_hyper;
    const bool is_mlse = setup.loss->name() == "mlse";
    if (is_mlse) {
        mlse_hyper.grid = setup.mlse_grid;
        mlse_hyper.thresholds = setup.thresholds;
    }

    std::vector<TrialRecord> records;
    records.reserve(cfg.iterations);
    // An unrecoverable numerical failure aborts this trial with a logged
    // error; records gathered so far are kept and other seeds continue.
    try {
    for (int t = 1; t <= cfg.iterations; ++t) {
        KernelParams params_t = fixed_params;
        if (cfg.gp_refit && data.size() >= 2) {
            HyperFitOptions fit_opts;
            fit_opts.per_dimension_lengthscale = cfg.gp_per_dimension_lengthscale;
            HyperFitResult fit =
                fit_hyperparams(data, HyperBounds::from_data(data), fit_opts, root.fork(100 + t));
            if (!fit.degenerate_fallback) params_t = fit.params;
        }
        GpPosterior gp(data, params_t);

        Vector x_t;
        switch (cfg.acquisition) {
            case AcquisitionId::HES: {
                AcquisitionResult acq =
                    optimize_ehig(gp, *setup.loss, box, cfg.optimizer, root.fork(1000 + t));
                x_t = acq.chosen_x;
                break;
            }
            case AcquisitionId::KG: {
                AcquisitionResult acq =
                    optimize_ehig(gp, *setup.neg_value, box, cfg.optimizer, root.fork(1000 + t));
                x_t = acq.chosen_x;
                break;
            }
            case AcquisitionId::RS:
                x_t = rs_choice(box, rs_rng);
                break;
            case AcquisitionId::US: {
                double best = -std::numeric_limits<double>::infinity();
                for (const Vector& c : candidates) {
                    const double s = us_score(c, gp);
                    if (s > best) {
                        best = s;
                        x_t = c;
                    }
                }
                break;
            }
            case AcquisitionId::EI: {
                double f_star = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < data.size(); ++i) {
                    Vector xi(d);
                    for (std::size_t c = 0; c < d; ++c) xi[c] = data.inputs(i, c);
                    f_star = std::max(f_star, gp.predict(xi).mean);
                }
                double best = -std::numeric_limits<double>::infinity();
                for (const Vector& c : candidates) {
                    const double s = ei_analytic(c, gp, f_star);
                    if (s > best) {
                        best = s;
                        x_t = c;
                    }
                }
                break;
            }
            case AcquisitionId::POM: {
                double best = -std::numeric_limits<double>::infinity();
                for (const Vector& c : candidates) {
                    const double s = pom_score(c, gp, setup.thresholds);
                    if (s > best) {
                        best = s;
                        x_t = c;
                    }
                }
                break;
            }
        }

        const double y_t = setup.blackbox.eval_noisy(x_t, noise_rng);
        data = data.augmented(x_t, y_t);
        GpPosterior updated(data, params_t);

        BayesActionResult action =
            bayes_action(updated, *setup.loss, box, cfg.solver, root.fork(2000 + t));

        TrialRecord rec;
        rec.seed = seed;
        rec.iteration = t;
        rec.x = x_t;
        rec.y = y_t;
        rec.action = action.action;
        if (is_mlse) {
            rec.metric = mlse_accuracy(updated, mlse_hyper, setup.blackbox.truth());
            rec.metric_name = "mlse_accuracy";
        } else {
            rec.metric = -true_loss(setup.blackbox.truth(), *setup.loss, action.action);
            rec.metric_name = "neg_" + setup.loss->name() + "_loss";
        }
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        records.push_back(std::move(rec));
    }
    } catch (const std::exception& e) {
        std::cerr << "trial seed " << seed << " aborted after " << records.size()
                  << " iteration(s): " << e.what() << "\n";
    }
    return records;
}

std::vector<SummaryRow> aggregate(const std::vector<std::vector<TrialRecord>>& trials) {
    if (trials.empty()) return {};
    std::map<int, Vector> by_iteration;
    for (const auto& trial : trials)
        for (const TrialRecord& r : trial) by_iteration[r.iteration].push_back(r.metric);
    std::vector<SummaryRow> rows;
    for (const auto& [iter, metrics] : by_iteration) {
        SummaryRow row;
        row.iteration = iter;
        row.n_seeds = static_cast<int>(metrics.size());
        for (double m : metrics) row.mean += m;
        row.mean /= metrics.size();
        if (metrics.size() > 1) {
            double var = 0.0;
            for (double m : metrics) var += (m - row.mean) * (m - row.mean);
            var /= (metrics.size() - 1);
            row.stderr_ = std::sqrt(var / metrics.size());
        }
        rows.push_back(row);
    }
    return rows;
}

std::string trial_csv(const std::vector<TrialRecord>& records, bool record_wall_time) {
    std::ostringstream os;
    const std::size_t d = records.empty() ? 0 : records.front().x.size();
    const std::size_t a = records.empty() ? 0 : records.front().action.size();
    os << "seed,iteration";
    for (std::size_t c = 0; c < d; ++c) os << ",x" << c;
    os << ",y,metric,metric_name";
    for (std::size_t c = 0; c < a; ++c) os << ",action" << c;
    os << ",wall_time_s\n";
    for (const TrialRecord& r : records) {
        os << r.seed << "," << r.iteration;
        for (double v : r.x) os << "," << fmt_double(v);
        os << "," << fmt_double(r.y) << "," << fmt_double(r.metric) << "," << r.metric_name;
        for (double v : r.action) os << "," << fmt_double(v);
        os << "," << fmt_double(record_wall_time ? r.wall_time_s : 0.0) << "\n";
    }
    return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "iteration,mean,stderr,n_seeds\n";
    for (const SummaryRow& r : rows)
        os << r.iteration << "," << fmt_double(r.mean) << "," << fmt_double(r.stderr_) << ","
           << r.n_seeds << "\n";
    return os.str();
}

std::vector<std::vector<TrialRecord>> run_experiment(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    if (const char* env = std::getenv("HES_SEED")) {
        cfg.seeds.clear();
        for (double s : parse_list_value("HES_SEED", env))
            cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    const ProblemSetup setup = build_problem(cfg);

    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::vector<TrialRecord>> all(cfg.seeds.size());
    const int threads = std::max(1, cfg.threads);
    for (std::size_t batch = 0; batch < cfg.seeds.size(); batch += threads) {
        std::vector<std::future<std::vector<TrialRecord>>> futures;
        const std::size_t end = std::min(batch + threads, cfg.seeds.size());
        for (std::size_t i = batch; i < end; ++i)
            futures.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                         [&cfg, &setup, i] {
                                             return run_trial(cfg, setup, cfg.seeds[i]);
                                         }));
        for (std::size_t i = batch; i < end; ++i) all[i] = futures[i - batch].get();
    }

    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const std::string path =
            cfg.out_dir + "/trial_seed" + std::to_string(cfg.seeds[i]) + ".csv";
        std::ofstream out(path, std::ios::binary);
        out << trial_csv(all[i], cfg.record_wall_time);
    }
    {
        std::ofstream out(cfg.out_dir + "/summary.csv", std::ios::binary);
        out << summary_csv(aggregate(all));
    }
    return all;
}

std::vector<SummaryRow> aggregate_directory(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("trial_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no trial_*.csv files found in " + dir);

    std::vector<std::vector<TrialRecord>> trials;
    for (const std::string& path : files) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open " + path);
        std::string header;
        if (!std::getline(in, header)) throw ConfigError(path + ": empty file");
        std::vector<std::string> cols;
        {
            std::stringstream ss(header);
            std::string tok;
            while (std::getline(ss, tok, ',')) cols.push_back(trim(tok));
        }
        const auto iter_it = std::find(cols.begin(), cols.end(), "iteration");
        const auto metric_it = std::find(cols.begin(), cols.end(), "metric");
        if (iter_it == cols.end() || metric_it == cols.end())
            throw ConfigError(path + ": missing iteration/metric columns");
        const std::size_t iter_idx = iter_it - cols.begin();
        const std::size_t metric_idx = metric_it - cols.begin();

        std::vector<TrialRecord> recs;
        std::string line;
        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            std::vector<std::string> vals;
            std::stringstream ss(line);
            std::string tok;
            while (std::getline(ss, tok, ',')) vals.push_back(tok);
            if (vals.size() <= std::max(iter_idx, metric_idx))
                throw ConfigError(path + ":" + std::to_string(lineno) + ": short row");
            TrialRecord r;
            r.iteration = parse_int_value("iteration", vals[iter_idx]);
            r.metric = parse_double_value("metric", vals[metric_idx]);
            recs.push_back(r);
        }
        trials.push_back(std::move(recs));
    }

    std::vector<SummaryRow> rows = aggregate(trials);
    std::ofstream out(dir + "/summary.csv", std::ios::binary);
    out << summary_csv(rows);
    return rows;
}

}  // namespace hes
