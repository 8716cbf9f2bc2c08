#pragma once

#include "hes/losses.hpp"

namespace hes {

struct OptimizerConfig {
    int n_fantasies = 16;  // M
    int n_samples = 32;    // N, inner epsilon bank per fantasy set
    int restarts = 10;
    int steps = 150;
    double step_size = 0.05;
    double jitter = kDefaultJitter;
    int candidate_count = 2048;
};

struct AcquisitionResult {
    Vector chosen_x;
    double objective_value = 0.0;
    std::vector<double> restart_finals;
    std::vector<std::vector<double>> restart_traces;  // objective after each step
    double wall_time_s = 0.0;
    bool no_improvement = false;
};

// Current joint posterior at a fixed anchor grid plus the cross solve
// L^-1 K(X, grid); shared by every restart of one acquisition optimization.
struct FixedAnchorData {
    JointGaussian joint;
    Matrix cross_sol;
};

FixedAnchorData make_fixed_anchor_data(const GpPosterior& gp, const LossSpec& spec);

// One-shot optimization state: a candidate query, one action per fantasy
// draw, and the lambda / epsilon banks, which stay fixed for the lifetime of
// the problem. objective() is the quantity to minimize; it equals the
// negative acquisition value up to the query-independent entropy of the
// current state.
class EhigProblem {
public:
    EhigProblem(const GpPosterior& gp, const LossSpec& spec, Box design_box, int n_fantasies,
                int n_samples, double jitter, RngStream bank_rng,
                const FixedAnchorData* shared = nullptr);
    // Explicit banks (tests and oracles).
    EhigProblem(const GpPosterior& gp, const LossSpec& spec, Box design_box, Vector lambda_bank,
                Matrix eps_bank, double jitter, const FixedAnchorData* shared = nullptr);

    std::size_t n_fantasies() const { return lambda_.size(); }
    std::size_t n_samples() const { return eps_.cols(); }
    const Vector& lambda_bank() const { return lambda_; }
    const Matrix& eps_bank() const { return eps_; }
    const Box& design_box() const { return box_; }
    const LossSpec& spec() const { return spec_; }

    void set_state(Vector x, std::vector<Vector> actions);
    const Vector& x() const { return x_; }
    const std::vector<Vector>& actions() const { return actions_; }
    double current_objective() const { return current_objective_; }

    // (1/NM) sum_{m,n} l'(mu(x, a_m) + U(x, a_m) eps_n, a_m) over the fantasy
    // models conditioned on ybar(x, D, lambda_m). Deterministic given the
    // state and banks.
    double objective();
    double objective_grad(Vector& grad_x, std::vector<Vector>& grad_actions);

    // Per-fantasy terms of the last evaluation; the objective is their mean.
    // The terms are independent given the query, which lets the optimizer
    // accept or reject per-action steps from term values alone.
    const Vector& term_values() const { return term_values_; }

private:
    double evaluate(bool with_grad, Vector* grad_x, std::vector<Vector>* grad_actions);

    const GpPosterior& gp_;
    const LossSpec& spec_;
    Box box_;
    Vector lambda_;
    Matrix eps_;
    Vector eps_mean_;
    double jitter_;

    // Fixed-anchor constants (multi-level-set): current joint at the grid and
    // the cross solve L^-1 K(X, grid), built once.
    bool fixed_anchors_ = false;
    JointGaussian fixed_joint_;
    Matrix fixed_cross_sol_;

    Vector x_;
    std::vector<Vector> actions_;
    Vector term_values_;
    double current_objective_ = 0.0;
};

// Jointly descends (x, a_1..a_M) with fresh banks per restart and returns the
// restart with the lowest final objective.
AcquisitionResult optimize_ehig(const GpPosterior& gp, const LossSpec& spec, const Box& box,
                                const OptimizerConfig& opt, RngStream rng);

struct HEntropyResult {
    double value = 0.0;
    double stderr = 0.0;
    Vector action;
};

// Monte Carlo estimate of the minimum posterior expected loss (the
// uncertainty of the current state for this decision problem).
HEntropyResult h_entropy(const GpPosterior& gp, const LossSpec& spec, const Box& box,
                         const SolverConfig& solver, RngStream rng);

double normal_cdf(double z);
double normal_pdf(double z);

// Closed-form expected improvement with the plug-in incumbent f_star;
// predictive scale includes observation noise.
double ei_analytic(const Vector& x, const GpPosterior& gp, double f_star);

// Probability of improvement over tau using the noise-free posterior scale.
double pi_analytic(const Vector& x, const GpPosterior& gp, double tau);

// Posterior predictive variance (uncertainty sampling score).
double us_score(const Vector& x, const GpPosterior& gp);

// Uniform draw from the box (random search).
Vector rs_choice(const Box& box, RngStream& rng);

// Label uncertainty at the nearest threshold: -min_i |P(f(x) > c_i) - 0.5|,
// maximal (zero) when the posterior mean sits on a threshold.
double pom_score(const Vector& x, const GpPosterior& gp, const Vector& thresholds);

}  // namespace hes
