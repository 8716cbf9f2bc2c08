#pragma once

#include "hes/gp.hpp"
#include "hes/tape.hpp"

namespace hes {

// Tape constants for one GpPosterior, shared by every fantasy branch of an
// acquisition graph. Coordinates are pre-scaled by the inverse lengthscales
// so kernels become exp(-0.5 * squared distance).
struct GpTapeConstants {
    std::size_t n = 0;
    std::size_t dim = 0;
    double prior_mean = 0.0;
    double signal_variance = 1.0;
    double noise_variance = 0.0;
    Var inv_lengthscale_diag;  // d x d
    Var x_scaled;              // n x d (invalid when n == 0)
    Var chol_lower;            // n x n
    Var alpha;                 // n x 1
};

GpTapeConstants gp_tape_constants(Tape& tape, const GpPosterior& gp);

// points (rows) -> points scaled by 1/lengthscale.
Var scale_points(Tape& tape, const GpTapeConstants& c, Var points);

// sigma^2 exp(-0.5 ||a_i - b_j||^2) for pre-scaled row sets.
Var kernel_from_scaled(Tape& tape, const GpTapeConstants& c, Var a_scaled, Var b_scaled);

struct JointNodes {
    Var anchors_scaled;  // K x d
    Var mean;            // K x 1
    Var cov;             // K x K
    Var cross_sol;       // n x K solve L^-1 K(X, P); invalid when n == 0
};

// Posterior mean and covariance at anchor rows, differentiable in the anchors.
JointNodes joint_posterior_nodes(Tape& tape, const GpTapeConstants& c, Var anchors);

struct PointNodes {
    Var x_scaled;         // 1 x d
    Var kvec;             // n x 1 (invalid when n == 0)
    Var solve;            // n x 1 L^-1 k (invalid when n == 0)
    Var mean;             // 1 x 1
    Var variance;         // 1 x 1, floored at 1e-14
    Var predictive_var;   // 1 x 1, variance + noise
};

PointNodes point_posterior_nodes(Tape& tape, const GpTapeConstants& c, Var x_point /* 1 x d */);

// Posterior covariance between the anchors and f(x) given the current data:
// K(P, x) - K(P, X) (K + noise I)^-1 K(X, x). Returns a K x 1 node.
Var cross_covariance_nodes(Tape& tape, const GpTapeConstants& c, const JointNodes& joint,
                           const PointNodes& px);

// Gaussian conditioning of (mean, cov) at the anchors on the observation
// ybar at x: mean + ktilde (ybar - mean_x) / v, cov - ktilde ktilde^T / v
// with v the predictive variance at x. Equals a fantasy-model rebuild.
struct ConditionedJoint {
    Var mean;  // K x 1
    Var cov;   // K x K
};

ConditionedJoint condition_joint(Tape& tape, const JointNodes& joint, const PointNodes& px,
                                 Var ktilde, Var ybar);

}  // namespace hes
