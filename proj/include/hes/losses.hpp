#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "hes/gp.hpp"
#include "hes/tape.hpp"

namespace hes {

struct Box {
    Vector lo;
    Vector hi;

    std::size_t dim() const { return lo.size(); }
    double width(std::size_t i) const { return hi[i] - lo[i]; }
    Vector clamp(Vector x) const;
    bool contains(const Vector& x, double tol = 1e-9) const;
};

struct TopKDiversityHyper {
    int k = 1;
    double distance_weight = 0.5;
    double distance_cap = std::numeric_limits<double>::infinity();
};

struct KGuessesHyper {
    int k = 1;
    double temperature = 0.05;
};

struct MultiLevelSetHyper {
    Matrix grid;        // J x d design points
    Vector thresholds;  // strictly increasing
};

struct SequenceHyper {
    Vector targets;
};

enum class MaxMode { Hard, Smooth };

// Plain loss reductions; the LossSpec classes below route through these.
double topk_diversity_loss(const Vector& f_values, const Matrix& points,
                           const TopKDiversityHyper& hyper);
double k_guesses_loss(const Vector& f_values, MaxMode mode, double temperature = 0.05);
double mlse_loss(const Vector& f_values, const Matrix& logits, const Vector& thresholds);
double sequence_loss(const Vector& f_values, const Vector& targets);
double neg_value_loss(const Vector& f_values);

// A terminal decision problem: an action parameterization, the anchor map
// a -> (x_1(a), ..., x_K(a)), and the reduction l'(f(x_1..K), a). Actions for
// the point-set losses are flattened K x d coordinates; the multi-level-set
// action is a J x m matrix of logits squashed through a logistic.
class LossSpec {
public:
    virtual ~LossSpec() = default;

    virtual std::string name() const = 0;
    virtual std::size_t anchor_count() const = 0;
    virtual std::size_t action_dim() const = 0;

    // Anchors independent of the action (the loss grid).
    virtual bool anchors_fixed() const { return false; }
    // Reduction linear in the function values; lets solvers collapse the
    // sample average before the reduction.
    virtual bool linear_in_values() const { return false; }

    virtual Matrix anchor_points(const Vector& action) const = 0;
    virtual Var build_anchor_points(Tape& tape, Var action) const = 0;

    // Mean over columns of the per-sample reduction; values is K x N.
    virtual Var build_mean_reduction(Tape& tape, Var values, Var action) const = 0;

    // Single-sample reduction in its optimization (smooth) form.
    virtual double reduction(const Vector& values, const Vector& action) const = 0;
    // Reporting form: hard max / hard-thresholded labels.
    virtual double hard_reduction(const Vector& values, const Vector& action) const {
        return reduction(values, action);
    }

    virtual Box action_box(const Box& design_box) const = 0;

    // Solver initialization: posterior-mean-seeded restarts pull anchor
    // points from the ranked peak list, the rest draw uniformly (logits draw
    // standard normal). salt decorrelates restarts.
    virtual Vector initial_action(const GpPosterior& gp, const Box& design_box,
                                  bool posterior_seeded, const std::vector<Vector>& peaks,
                                  std::size_t salt, RngStream& rng) const;
};

std::unique_ptr<LossSpec> make_topk_diversity_loss(TopKDiversityHyper hyper, std::size_t dim);
std::unique_ptr<LossSpec> make_k_guesses_loss(KGuessesHyper hyper, std::size_t dim);
std::unique_ptr<LossSpec> make_mlse_loss(MultiLevelSetHyper hyper);
std::unique_ptr<LossSpec> make_sequence_loss(SequenceHyper hyper, std::size_t dim);
std::unique_ptr<LossSpec> make_neg_value_loss(std::size_t dim);

// Exact (hard) loss of an action on the true function.
double true_loss(const std::function<double(const Vector&)>& f_true, const LossSpec& spec,
                 const Vector& action);

struct SolverConfig {
    int restarts = 10;
    int steps = 200;
    double step_size = 0.05;
    int n_samples = 64;  // size of the fixed epsilon bank
    double jitter = kDefaultJitter;
    int candidate_count = 2048;  // posterior-mean seeding pool
};

struct BayesActionResult {
    Vector action;
    double expected_loss;
    double stderr;
    bool no_improvement = false;
};

// Multi-restart projected descent on the fixed-sample Monte Carlo estimate of
// the posterior expected loss. Monotone non-increasing per restart
// (backtracking step acceptance).
BayesActionResult bayes_action(const GpPosterior& gp, const LossSpec& spec, const Box& design_box,
                               const SolverConfig& solver, RngStream rng);

// Discrete neg-value action set (the EI terminal decision): exact enumeration
// over candidate rows by posterior mean.
BayesActionResult bayes_action_discrete(const GpPosterior& gp, const Matrix& candidates);

// Initialization helper shared with the acquisition optimizer: candidate
// design points ranked by posterior mean (descending).
std::vector<Vector> posterior_mean_peaks(const GpPosterior& gp, const Box& box,
                                         std::size_t candidate_count);

}  // namespace hes
