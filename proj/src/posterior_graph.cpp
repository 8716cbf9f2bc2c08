#include "hes/posterior_graph.hpp"

#include <limits>

namespace hes {

GpTapeConstants gp_tape_constants(Tape& tape, const GpPosterior& gp) {
    GpTapeConstants c;
    c.n = gp.data().size();
    c.dim = gp.params().lengthscales.size();
    c.prior_mean = gp.prior_mean();
    c.signal_variance = gp.params().signal_variance;
    c.noise_variance = gp.params().noise_variance;
    Matrix diag(c.dim, c.dim);
    for (std::size_t i = 0; i < c.dim; ++i) diag(i, i) = 1.0 / gp.params().lengthscales[i];
    c.inv_lengthscale_diag = tape.constant(std::move(diag));
    if (c.n > 0) {
        c.x_scaled = tape.matmul_(tape.constant(gp.data().inputs), c.inv_lengthscale_diag);
        c.chol_lower = tape.constant(gp.chol().lower);
        c.alpha = tape.constant(Matrix::col_vector(gp.alpha()));
    }
    return c;
}

Var scale_points(Tape& tape, const GpTapeConstants& c, Var points) {
    return tape.matmul_(points, c.inv_lengthscale_diag);
}

Var kernel_from_scaled(Tape& tape, const GpTapeConstants& c, Var a_scaled, Var b_scaled) {
    Var d2 = tape.pairwise_sqdist(a_scaled, b_scaled);
    return tape.scale(tape.exp_(tape.scale(d2, -0.5)), c.signal_variance);
}

JointNodes joint_posterior_nodes(Tape& tape, const GpTapeConstants& c, Var anchors) {
    JointNodes out;
    out.anchors_scaled = scale_points(tape, c, anchors);
    Var kpp = kernel_from_scaled(tape, c, out.anchors_scaled, out.anchors_scaled);
    const std::size_t k = tape.value(anchors).rows();
    if (c.n == 0) {
        out.mean = tape.constant(Matrix(k, 1, c.prior_mean));
        out.cov = kpp;
        return out;
    }
    Var kpx = kernel_from_scaled(tape, c, out.anchors_scaled, c.x_scaled);  // K x n
    out.mean = tape.scale(tape.matmul_(kpx, c.alpha), 1.0, c.prior_mean);
    out.cross_sol = tape.trisolve_lower(c.chol_lower, tape.transpose(kpx));  // n x K
    out.cov = tape.sub(kpp, tape.matmul_(tape.transpose(out.cross_sol), out.cross_sol));
    return out;
}

PointNodes point_posterior_nodes(Tape& tape, const GpTapeConstants& c, Var x_point) {
    PointNodes out;
    Var sv = tape.constant_scalar(c.signal_variance);
    out.x_scaled = scale_points(tape, c, x_point);
    if (c.n == 0) {
        out.mean = tape.constant_scalar(c.prior_mean);
        out.variance = sv;
        out.predictive_var = tape.scale(sv, 1.0, c.noise_variance);
        return out;
    }
    out.kvec = tape.transpose(kernel_from_scaled(tape, c, out.x_scaled, c.x_scaled));  // n x 1
    out.solve = tape.trisolve_lower(c.chol_lower, out.kvec);
    out.mean = tape.scale(tape.matmul_(tape.transpose(out.kvec), c.alpha), 1.0, c.prior_mean);
    out.variance = tape.clip(tape.sub(sv, tape.dot_(out.solve, out.solve)), 1e-14,
                             std::numeric_limits<double>::infinity());
    out.predictive_var = tape.scale(out.variance, 1.0, c.noise_variance);
    return out;
}

Var cross_covariance_nodes(Tape& tape, const GpTapeConstants& c, const JointNodes& joint,
                           const PointNodes& px) {
    Var prior = kernel_from_scaled(tape, c, joint.anchors_scaled, px.x_scaled);  // K x 1
    if (c.n == 0) return prior;
    Var correction = tape.matmul_(tape.transpose(joint.cross_sol), px.solve);  // K x 1
    return tape.sub(prior, correction);
}

ConditionedJoint condition_joint(Tape& tape, const JointNodes& joint, const PointNodes& px,
                                 Var ktilde, Var ybar) {
    ConditionedJoint out;
    Var resid = tape.div(tape.sub(ybar, px.mean), px.predictive_var);  // scalar
    out.mean = tape.add(joint.mean, tape.mul(ktilde, resid));
    Var outer = tape.div(tape.matmul_(ktilde, tape.transpose(ktilde)), px.predictive_var);
    out.cov = tape.sub(joint.cov, outer);
    return out;
}

}  // namespace hes
