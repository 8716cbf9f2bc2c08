#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hes/oracles.hpp"
#include "hes/runner.hpp"

namespace py = pybind11;
using namespace hes;

namespace {

Matrix as_matrix(const std::vector<Vector>& rows) { return Matrix::from_rows(rows); }

std::vector<Vector> matrix_rows(const Matrix& m) {
    std::vector<Vector> rows(m.rows(), Vector(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    return rows;
}

GpPosterior make_gp(const std::vector<Vector>& x, const Vector& y, const Vector& lengthscales,
                    double signal_variance, double noise_variance,
                    std::optional<double> prior_mean) {
    Dataset d;
    d.inputs = x.empty() ? Matrix(0, lengthscales.size()) : as_matrix(x);
    d.outputs = y;
    KernelParams p;
    p.lengthscales = lengthscales;
    p.signal_variance = signal_variance;
    p.noise_variance = noise_variance;
    if (prior_mean) return GpPosterior(std::move(d), std::move(p), *prior_mean);
    return GpPosterior(std::move(d), std::move(p));
}

Box make_box(const Vector& lo, const Vector& hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("box bounds size mismatch");
    return Box{lo, hi};
}

py::dict bayes_action_py(const GpPosterior& gp, const LossSpec& spec, const Vector& lo,
                         const Vector& hi, int restarts, int steps, int n_samples,
                         std::uint64_t seed) {
    SolverConfig solver;
    solver.restarts = restarts;
    solver.steps = steps;
    solver.n_samples = n_samples;
    const BayesActionResult r = bayes_action(gp, spec, make_box(lo, hi), solver, RngStream(seed));
    py::dict out;
    out["action"] = r.action;
    out["expected_loss"] = r.expected_loss;
    out["stderr"] = r.stderr;
    out["no_improvement"] = r.no_improvement;
    return out;
}

py::dict optimize_ehig_py(const GpPosterior& gp, const LossSpec& spec, const Vector& lo,
                          const Vector& hi, int n_fantasies, int n_samples, int restarts,
                          int steps, std::uint64_t seed) {
    OptimizerConfig opt;
    opt.n_fantasies = n_fantasies;
    opt.n_samples = n_samples;
    opt.restarts = restarts;
    opt.steps = steps;
    const AcquisitionResult r = optimize_ehig(gp, spec, make_box(lo, hi), opt, RngStream(seed));
    py::dict out;
    out["chosen_x"] = r.chosen_x;
    out["objective_value"] = r.objective_value;
    out["restart_finals"] = r.restart_finals;
    out["no_improvement"] = r.no_improvement;
    return out;
}

py::dict h_entropy_py(const GpPosterior& gp, const LossSpec& spec, const Vector& lo,
                      const Vector& hi, int n_samples, std::uint64_t seed) {
    SolverConfig solver;
    solver.n_samples = n_samples;
    const HEntropyResult r = h_entropy(gp, spec, make_box(lo, hi), solver, RngStream(seed));
    py::dict out;
    out["value"] = r.value;
    out["stderr"] = r.stderr;
    out["action"] = r.action;
    return out;
}

py::list run_experiment_py(const std::string& config_path) {
    const auto trials = run_experiment(load_config(config_path));
    py::list out;
    for (const auto& trial : trials) {
        py::list rows;
        for (const TrialRecord& r : trial) {
            py::dict row;
            row["seed"] = r.seed;
            row["iteration"] = r.iteration;
            row["x"] = r.x;
            row["y"] = r.y;
            row["metric"] = r.metric;
            row["metric_name"] = r.metric_name;
            rows.append(row);
        }
        out.append(rows);
    }
    return out;
}

py::dict summary_of(const CheckSummary& s) {
    py::dict out;
    out["passed"] = s.passed();
    out["passed_count"] = s.passed_count;
    out["total"] = static_cast<int>(s.checks.size());
    out["required"] = s.required;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Decision-aware Bayesian optimization core (H-entropy search)";

    py::register_exception<ConfigError>(m, "ConfigError");

    py::class_<GpPosterior>(m, "GpPosterior")
        .def(py::init(&make_gp), py::arg("x"), py::arg("y"), py::arg("lengthscales"),
             py::arg("signal_variance") = 1.0, py::arg("noise_variance") = 0.0,
             py::arg("prior_mean") = std::nullopt)
        .def("predict",
             [](const GpPosterior& gp, const Vector& x) {
                 const auto p = gp.predict(x);
                 return py::make_tuple(p.mean, p.variance);
             })
        .def("joint_posterior",
             [](const GpPosterior& gp, const std::vector<Vector>& anchors) {
                 const JointGaussian j = gp.joint_posterior(as_matrix(anchors));
                 return py::make_tuple(j.mean, matrix_rows(j.scale));
             })
        .def("fantasy_observation", &GpPosterior::fantasy_observation)
        .def("fantasize", &GpPosterior::fantasize)
        .def_property_readonly("n", [](const GpPosterior& gp) { return gp.data().size(); })
        .def_property_readonly("prior_mean", &GpPosterior::prior_mean);

    py::class_<LossSpec>(m, "LossSpec")
        .def_property_readonly("name", &LossSpec::name)
        .def_property_readonly("anchor_count", &LossSpec::anchor_count)
        .def_property_readonly("action_dim", &LossSpec::action_dim)
        .def("true_loss", [](const LossSpec& spec, const std::function<double(const Vector&)>& f,
                             const Vector& action) { return true_loss(f, spec, action); });

    m.def("topk_diversity_loss_spec",
          [](int k, double weight, double cap, std::size_t dim) {
              TopKDiversityHyper h;
              h.k = k;
              h.distance_weight = weight;
              h.distance_cap = cap;
              return make_topk_diversity_loss(h, dim);
          },
          py::arg("k"), py::arg("distance_weight") = 0.5,
          py::arg("distance_cap") = std::numeric_limits<double>::infinity(), py::arg("dim") = 1);
    m.def("k_guesses_loss_spec",
          [](int k, double temperature, std::size_t dim) {
              KGuessesHyper h;
              h.k = k;
              h.temperature = temperature;
              return make_k_guesses_loss(h, dim);
          },
          py::arg("k"), py::arg("temperature") = 0.05, py::arg("dim") = 1);
    m.def("mlse_loss_spec",
          [](const std::vector<Vector>& grid, const Vector& thresholds) {
              MultiLevelSetHyper h;
              h.grid = as_matrix(grid);
              h.thresholds = thresholds;
              return make_mlse_loss(std::move(h));
          },
          py::arg("grid"), py::arg("thresholds"));
    m.def("sequence_loss_spec",
          [](const Vector& targets, std::size_t dim) {
              SequenceHyper h;
              h.targets = targets;
              return make_sequence_loss(std::move(h), dim);
          },
          py::arg("targets"), py::arg("dim") = 1);
    m.def("neg_value_loss_spec", [](std::size_t dim) { return make_neg_value_loss(dim); },
          py::arg("dim") = 1);

    m.def("bayes_action", &bayes_action_py, py::arg("gp"), py::arg("loss"), py::arg("lo"),
          py::arg("hi"), py::arg("restarts") = 10, py::arg("steps") = 200,
          py::arg("n_samples") = 64, py::arg("seed") = 0);
    m.def("optimize_ehig", &optimize_ehig_py, py::arg("gp"), py::arg("loss"), py::arg("lo"),
          py::arg("hi"), py::arg("n_fantasies") = 16, py::arg("n_samples") = 32,
          py::arg("restarts") = 10, py::arg("steps") = 150, py::arg("seed") = 0);
    m.def("h_entropy", &h_entropy_py, py::arg("gp"), py::arg("loss"), py::arg("lo"), py::arg("hi"),
          py::arg("n_samples") = 64, py::arg("seed") = 0);

    m.def("ei_analytic", &ei_analytic);
    m.def("pi_analytic", &pi_analytic);
    m.def("us_score", &us_score);
    m.def("pom_score", &pom_score);

    m.def("alpine", &alpine);
    m.def("multihills", [](const Vector& x) { return multihills(x); });
    m.def("smooth_max", &smooth_max, py::arg("values"), py::arg("temperature"));
    m.def("raster_eval", [](const std::string& path, const Vector& x) {
        const RasterGrid g = load_raster_csv(path);
        return raster_eval(g, x);
    });

    m.def("run_experiment", &run_experiment_py, py::arg("config_path"),
          "Run every seed of a config file; returns records per trial");
    m.def("gradcheck", [](int instances) { return summary_of(run_gradcheck(instances)); },
          py::arg("instances") = 20);

    m.attr("__version__") = "0.1.0";
}
