#include "hes/acquisition.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "hes/descent.hpp"
#include "hes/errors.hpp"
#include "hes/posterior_graph.hpp"

namespace hes {

namespace {

Vector column_means(const Matrix& m) {
    Vector out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out[i] += m(i, j);
        out[i] /= m.cols();
    }
    return out;
}

}  // namespace

FixedAnchorData make_fixed_anchor_data(const GpPosterior& gp, const LossSpec& spec) {
    FixedAnchorData out;
    const Matrix grid = spec.anchor_points(Vector(spec.action_dim(), 0.0));
    out.joint = gp.joint_posterior(grid);
    if (gp.data().size() > 0) {
        const Matrix cross = kernel_cross(grid, gp.data().inputs, gp.params());
        out.cross_sol = tri_solve_matrix(gp.chol().lower, cross.transposed(), TriSide::Lower);
    }
    return out;
}

EhigProblem::EhigProblem(const GpPosterior& gp, const LossSpec& spec, Box design_box,
                         int n_fantasies, int n_samples, double jitter, RngStream bank_rng,
                         const FixedAnchorData* shared)
    : gp_(gp), spec_(spec), box_(std::move(design_box)), jitter_(jitter) {
    if (n_fantasies < 1 || n_samples < 1)
        throw std::invalid_argument("EhigProblem: n_fantasies and n_samples must be >= 1");
    RngStream lam_rng = bank_rng.fork(1);
    RngStream eps_rng = bank_rng.fork(2);
    lambda_ = stratified_normal_vector(lam_rng, n_fantasies);
    eps_ = antithetic_normal_columns(eps_rng, spec.anchor_count(), n_samples);
    eps_mean_ = column_means(eps_);
    fixed_anchors_ = spec.anchors_fixed() && spec.linear_in_values();
    if (fixed_anchors_) {
        if (shared) {
            fixed_joint_ = shared->joint;
            fixed_cross_sol_ = shared->cross_sol;
        } else {
            FixedAnchorData data = make_fixed_anchor_data(gp, spec);
            fixed_joint_ = std::move(data.joint);
            fixed_cross_sol_ = std::move(data.cross_sol);
        }
    }
}

EhigProblem::EhigProblem(const GpPosterior& gp, const LossSpec& spec, Box design_box,
                         Vector lambda_bank, Matrix eps_bank, double jitter,
                         const FixedAnchorData* shared)
    : gp_(gp), spec_(spec), box_(std::move(design_box)), lambda_(std::move(lambda_bank)),
      eps_(std::move(eps_bank)), jitter_(jitter) {
    if (lambda_.empty() || eps_.cols() == 0)
        throw std::invalid_argument("EhigProblem: banks must be non-empty");
    if (eps_.rows() != spec.anchor_count())
        throw DimensionMismatch("EhigProblem: eps bank rows != anchor count");
    eps_mean_ = column_means(eps_);
    fixed_anchors_ = spec.anchors_fixed() && spec.linear_in_values();
    if (fixed_anchors_) {
        if (shared) {
            fixed_joint_ = shared->joint;
            fixed_cross_sol_ = shared->cross_sol;
        } else {
            FixedAnchorData data = make_fixed_anchor_data(gp, spec);
            fixed_joint_ = std::move(data.joint);
            fixed_cross_sol_ = std::move(data.cross_sol);
        }
    }
}

void EhigProblem::set_state(Vector x, std::vector<Vector> actions) {
    if (actions.size() != lambda_.size())
        throw DimensionMismatch("EhigProblem: one action per fantasy required");
    if (x.size() != box_.dim()) throw DimensionMismatch("EhigProblem: query dimension mismatch");
    x_ = std::move(x);
    actions_ = std::move(actions);
}

double EhigProblem::objective() { return evaluate(false, nullptr, nullptr); }

double EhigProblem::objective_grad(Vector& grad_x, std::vector<Vector>& grad_actions) {
    return evaluate(true, &grad_x, &grad_actions);
}

double EhigProblem::evaluate(bool with_grad, Vector* grad_x, std::vector<Vector>* grad_actions) {
    const std::size_t m_count = lambda_.size();
    const std::size_t n_samples = eps_.cols();
    term_values_.assign(m_count, 0.0);
    Tape tape;
    GpTapeConstants c = gp_tape_constants(tape, gp_);

    Var x_var = tape.input(Matrix::row_vector(x_));
    std::vector<Var> action_vars;
    action_vars.reserve(m_count);
    for (const Vector& a : actions_) action_vars.push_back(tape.input(Matrix::col_vector(a)));

    PointNodes px = point_posterior_nodes(tape, c, x_var);
    Var pred_std = tape.sqrt_(px.predictive_var);

    Var total;
    if (fixed_anchors_) {
        // Fixed anchors: the fantasy covariance at the grid is shared by all
        // fantasies (it does not depend on the observed value), so the factor
        // update U0 . chol(I - cc^T) and its action on the mean epsilon are
        // built once, and each fantasy only shifts the mean.
        Var mu0 = tape.constant(Matrix::col_vector(fixed_joint_.mean));
        Var u0 = tape.constant(fixed_joint_.scale);
        Var grid_scaled =
            scale_points(tape, c, tape.constant(spec_.anchor_points(Vector(spec_.action_dim(), 0.0))));
        Var kprior = kernel_from_scaled(tape, c, grid_scaled, px.x_scaled);  // J x 1
        Var ktilde = kprior;
        if (c.n > 0) {
            Var correction = tape.matmul_(tape.constant(fixed_cross_sol_.transposed()), px.solve);
            ktilde = tape.sub(kprior, correction);
        }
        Var w = tape.div(tape.trisolve_lower(u0, ktilde), pred_std);  // c-vector of the downdate
        Var s2 = tape.square(w);
        Var t = tape.clip(tape.scale(tape.cumsum(s2), -1.0, 1.0), 1e-12,
                          std::numeric_limits<double>::infinity());
        Var tprev = tape.add(t, s2);
        Var dvec = tape.sqrt_(tape.div(t, tprev));
        Var rvec = tape.div(tape.constant_scalar(1.0), tape.sqrt_(tape.mul(t, tprev)));
        Var ebar = tape.constant(Matrix::col_vector(eps_mean_));
        Var q = tape.mul(tape.mul(w, rvec), ebar);
        Var pexc = tape.sub(tape.cumsum(q), q);
        Var lce = tape.sub(tape.mul(dvec, ebar), tape.mul(w, pexc));
        Var ue = tape.matmul_(u0, lce);  // U_fantasy * eps_mean, shared across fantasies
        Var base = tape.add(mu0, ue);
        for (std::size_t m = 0; m < m_count; ++m) {
            Var ybar = tape.add(px.mean, tape.scale(pred_std, lambda_[m]));
            Var resid = tape.div(tape.sub(ybar, px.mean), px.predictive_var);
            Var vbar = tape.add(base, tape.mul(ktilde, resid));
            Var obj_m = spec_.build_mean_reduction(tape, vbar, action_vars[m]);
            term_values_[m] = tape.value(obj_m).scalar();
            total = total.valid() ? tape.add(total, obj_m) : obj_m;
        }
    } else {
        Var eps_const = tape.constant(eps_);
        Var ones_row = tape.constant(Matrix(1, n_samples, 1.0));
        for (std::size_t m = 0; m < m_count; ++m) {
            Var anchors = spec_.build_anchor_points(tape, action_vars[m]);
            JointNodes joint = joint_posterior_nodes(tape, c, anchors);
            Var ktilde = cross_covariance_nodes(tape, c, joint, px);
            Var ybar = tape.add(px.mean, tape.scale(pred_std, lambda_[m]));
            ConditionedJoint cond = condition_joint(tape, joint, px, ktilde, ybar);
            Var u = tape.cholesky_(cond.cov, jitter_);
            Var values = tape.add(tape.matmul_(cond.mean, ones_row),
                                  tape.matmul_(u, eps_const));
            Var obj_m = spec_.build_mean_reduction(tape, values, action_vars[m]);
            term_values_[m] = tape.value(obj_m).scalar();
            total = total.valid() ? tape.add(total, obj_m) : obj_m;
        }
    }
    total = tape.scale(total, 1.0 / static_cast<double>(m_count));
    current_objective_ = tape.value(total).scalar();

    if (with_grad) {
        tape.backward(total);
        *grad_x = tape.grad(x_var).to_vector();
        grad_actions->resize(m_count);
        for (std::size_t m = 0; m < m_count; ++m)
            (*grad_actions)[m] = tape.grad(action_vars[m]).to_vector();
    }
    return current_objective_;
}

AcquisitionResult optimize_ehig(const GpPosterior& gp, const LossSpec& spec, const Box& box,
                                const OptimizerConfig& opt, RngStream rng) {
    const auto t_start = std::chrono::steady_clock::now();
    const std::size_t d = box.dim();
    const std::size_t adim = spec.action_dim();
    const std::size_t m_count = std::max(1, opt.n_fantasies);

    const std::vector<Vector> peaks = posterior_mean_peaks(gp, box, opt.candidate_count);
    const Box abox = spec.action_box(box);

    auto unpack = [&](const Vector& z, Vector& x, std::vector<Vector>& actions) {
        x.assign(z.begin(), z.begin() + d);
        actions.resize(m_count);
        for (std::size_t m = 0; m < m_count; ++m)
            actions[m].assign(z.begin() + d + m * adim, z.begin() + d + (m + 1) * adim);
    };

    AcquisitionResult result;
    result.objective_value = std::numeric_limits<double>::infinity();
    bool any_improved = false;
    std::optional<FixedAnchorData> shared;
    if (spec.anchors_fixed() && spec.linear_in_values())
        shared = make_fixed_anchor_data(gp, spec);
    const int restarts = std::max(1, opt.restarts);
    for (int r = 0; r < restarts; ++r) {
        RngStream rrng = rng.fork(500 + r);
        EhigProblem problem(gp, spec, box, static_cast<int>(m_count), opt.n_samples, opt.jitter,
                            rrng.fork(1), shared ? &*shared : nullptr);
        const bool seeded = r < (restarts + 1) / 2;

        Vector z;
        z.reserve(d + m_count * adim);
        RngStream init_rng = rrng.fork(2);
        if (seeded && !peaks.empty()) {
            const Vector& p = peaks[r % peaks.size()];
            for (std::size_t c = 0; c < d; ++c)
                z.push_back(p[c] + 0.01 * box.width(c) * init_rng.normal());
        } else {
            for (std::size_t c = 0; c < d; ++c)
                z.push_back(init_rng.uniform(box.lo[c], box.hi[c]));
        }
        // Fantasy-aware action initialization: each a_m starts at the peaks
        // of its own fantasy posterior at the initial query, so the inner
        // maximizations begin in the right basins.
        const Vector x0(z.begin(), z.begin() + d);
        for (std::size_t m = 0; m < m_count; ++m) {
            RngStream arng = init_rng.fork(10 + m);
            const double ybar = gp.fantasy_observation(x0, problem.lambda_bank()[m]);
            const GpPosterior fantasy = gp.fantasize(x0, ybar);
            const std::vector<Vector> fpeaks =
                posterior_mean_peaks(fantasy, box, std::min(opt.candidate_count, 512));
            Vector a = spec.initial_action(fantasy, box, true, fpeaks, 0, arng);
            z.insert(z.end(), a.begin(), a.end());
        }

        // Alternating block descent. The objective is separable across the
        // fantasy actions given the query, so action steps are accepted from
        // their own term values while query steps backtrack on the full
        // objective; every accepted sub-step lowers the full objective.
        Vector x_cur;
        std::vector<Vector> a_cur;
        unpack(z, x_cur, a_cur);
        problem.set_state(x_cur, a_cur);
        Vector gx;
        std::vector<Vector> ga;
        double cur = problem.objective_grad(gx, ga);
        const double init_value = cur;
        std::vector<double> trace;
        trace.reserve(opt.steps);
        auto clamp_to = [](Vector v, const Box& b) { return b.clamp(std::move(v)); };

        for (int t = 0; t < opt.steps; ++t) {
            const double lr =
                opt.step_size * 0.5 * (1.0 + std::cos(M_PI * t / std::max(1, opt.steps)));
            bool any_accept = false;

            // Query step.
            {
                double s = lr;
                for (int h = 0; h < 5; ++h) {
                    Vector x_cand(d);
                    for (std::size_t c = 0; c < d; ++c) x_cand[c] = x_cur[c] - s * gx[c];
                    x_cand = clamp_to(std::move(x_cand), box);
                    problem.set_state(x_cand, a_cur);
                    const double v = problem.objective();
                    if (v < cur) {
                        x_cur = std::move(x_cand);
                        cur = v;
                        any_accept = true;
                        break;
                    }
                    s *= 0.5;
                }
            }

            // Action steps, accepted per fantasy from the term values.
            {
                problem.set_state(x_cur, a_cur);
                problem.objective_grad(gx, ga);
                Vector base_terms = problem.term_values();
                std::vector<double> scale(m_count, lr * m_count);
                std::vector<bool> open(m_count, true);
                for (int round = 0; round < 6; ++round) {
                    std::vector<Vector> a_cand = a_cur;
                    bool proposed = false;
                    for (std::size_t m = 0; m < m_count; ++m) {
                        if (!open[m]) continue;
                        for (std::size_t c = 0; c < adim; ++c)
                            a_cand[m][c] = a_cur[m][c] - scale[m] * ga[m][c];
                        a_cand[m] = clamp_to(std::move(a_cand[m]), abox);
                        proposed = true;
                    }
                    if (!proposed) break;
                    problem.set_state(x_cur, a_cand);
                    problem.objective();
                    const Vector& cand_terms = problem.term_values();
                    for (std::size_t m = 0; m < m_count; ++m) {
                        if (!open[m]) continue;
                        if (cand_terms[m] < base_terms[m]) {
                            a_cur[m] = a_cand[m];
                            base_terms[m] = cand_terms[m];
                            open[m] = false;
                            any_accept = true;
                        } else {
                            scale[m] *= 0.5;
                        }
                    }
                }
                double total = 0.0;
                for (double term : base_terms) total += term;
                cur = total / static_cast<double>(m_count);
            }

            // Re-seed stale actions every few steps: propose each fantasy's
            // current-query peak set and keep it only where the term drops.
            if ((t + 1) % 10 == 0) {
                std::vector<Vector> proposal = a_cur;
                RngStream prop_rng = rrng.fork(3000 + t);
                for (std::size_t m = 0; m < m_count; ++m) {
                    const double ybar = gp.fantasy_observation(x_cur, problem.lambda_bank()[m]);
                    const GpPosterior fantasy = gp.fantasize(x_cur, ybar);
                    const std::vector<Vector> fpeaks =
                        posterior_mean_peaks(fantasy, box, std::min(opt.candidate_count, 512));
                    proposal[m] = spec.initial_action(fantasy, box, true, fpeaks, 0, prop_rng);
                }
                problem.set_state(x_cur, a_cur);
                problem.objective();
                Vector base_terms = problem.term_values();
                problem.set_state(x_cur, proposal);
                problem.objective();
                const Vector cand_terms = problem.term_values();
                for (std::size_t m = 0; m < m_count; ++m)
                    if (cand_terms[m] < base_terms[m]) {
                        a_cur[m] = proposal[m];
                        base_terms[m] = cand_terms[m];
                        any_accept = true;
                    }
                double total = 0.0;
                for (double term : base_terms) total += term;
                cur = total / static_cast<double>(m_count);
            }

            trace.push_back(cur);
            if (!any_accept) break;
            if (t + 1 < opt.steps) {
                problem.set_state(x_cur, a_cur);
                cur = problem.objective_grad(gx, ga);
            }
        }

        any_improved = any_improved || cur < init_value;
        result.restart_finals.push_back(cur);
        result.restart_traces.push_back(std::move(trace));
        if (cur < result.objective_value) {
            result.objective_value = cur;
            result.chosen_x = x_cur;
        }
    }
    result.no_improvement = !any_improved;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

HEntropyResult h_entropy(const GpPosterior& gp, const LossSpec& spec, const Box& box,
                         const SolverConfig& solver, RngStream rng) {
    BayesActionResult res = bayes_action(gp, spec, box, solver, rng);
    HEntropyResult out;
    out.value = res.expected_loss;
    out.stderr = res.stderr;
    out.action = res.action;
    return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

double ei_analytic(const Vector& x, const GpPosterior& gp, double f_star) {
    if (gp.data().size() == 0)
        throw std::invalid_argument("ei_analytic: needs at least one observation");
    const GpPosterior::Prediction p = gp.predict(x);
    const double s2 = p.variance + gp.params().noise_variance;
    const double delta = p.mean - f_star;
    if (s2 <= 1e-18) return std::max(delta, 0.0);
    const double s = std::sqrt(s2);
    const double z = delta / s;
    return std::max(0.0, delta * normal_cdf(z) + s * normal_pdf(z));
}

double pi_analytic(const Vector& x, const GpPosterior& gp, double tau) {
    const GpPosterior::Prediction p = gp.predict(x);
    const double sigma = std::sqrt(p.variance);
    if (sigma <= 1e-12) return p.mean > tau ? 1.0 : (p.mean == tau ? 0.5 : 0.0);
    return normal_cdf((p.mean - tau) / sigma);
}

double us_score(const Vector& x, const GpPosterior& gp) {
    return gp.predict(x).variance + gp.params().noise_variance;
}

Vector rs_choice(const Box& box, RngStream& rng) {
    Vector x(box.dim());
    for (std::size_t c = 0; c < box.dim(); ++c) x[c] = rng.uniform(box.lo[c], box.hi[c]);
    return x;
}

double pom_score(const Vector& x, const GpPosterior& gp, const Vector& thresholds) {
    if (thresholds.empty()) throw std::invalid_argument("pom_score: no thresholds");
    const GpPosterior::Prediction p = gp.predict(x);
    const double sigma = std::sqrt(std::max(p.variance, 1e-18));
    double best = std::numeric_limits<double>::infinity();
    for (double c : thresholds) {
        const double prob = normal_cdf((p.mean - c) / sigma);
        best = std::min(best, std::abs(prob - 0.5));
    }
    return -best;
}

}  // namespace hes
