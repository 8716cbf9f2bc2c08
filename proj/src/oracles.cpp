#include "hes/oracles.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "hes/benchfuncs.hpp"
#include "hes/posterior_graph.hpp"

namespace hes {

Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                            double step) {
    Vector g(x.size());
    Vector p = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + step;
        const double up = f(p);
        p[i] = orig - step;
        const double down = f(p);
        p[i] = orig;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double gradient_rel_error(const Vector& got, const Vector& want) {
    double scale = 1e-8;
    for (double w : want) scale = std::max(scale, std::abs(w));
    double err = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i)
        err = std::max(err, std::abs(got[i] - want[i]));
    return err / scale;
}

GpPosterior seeded_state_1d(std::uint64_t seed, std::size_t n_obs, double noise_variance) {
    RngStream rng(seed);
    RngStream xr = rng.fork(1);
    Dataset data;
    data.inputs = Matrix(n_obs, 1);
    for (std::size_t i = 0; i < n_obs; ++i) data.inputs(i, 0) = xr.uniform();
    const KernelParams prior_params = KernelParams::isotropic(1, 0.2, 1.0, 0.0);
    GpPosterior prior(Dataset{Matrix(0, 1), {}}, prior_params);
    const JointGaussian jg = prior.joint_posterior(data.inputs);
    Vector f = sample_values(jg, rng.fork(2).normal_vector(n_obs));
    RngStream nr = rng.fork(3);
    data.outputs.resize(n_obs);
    for (std::size_t i = 0; i < n_obs; ++i)
        data.outputs[i] = f[i] + std::sqrt(noise_variance) * nr.normal();
    return GpPosterior(std::move(data), KernelParams::isotropic(1, 0.2, 1.0, noise_variance));
}

namespace {

Box unit_box(std::size_t d) {
    Box b;
    b.lo.assign(d, 0.0);
    b.hi.assign(d, 1.0);
    return b;
}

Vector grid_1d(std::size_t points) {
    Vector g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / (points - 1);
    return g;
}

// Evaluates one loss reduction (values K x 1 plus the action) on the tape at
// a concatenated [values; action] point, so finite differences and the
// reverse sweep see the same function.
double reduction_at(const LossSpec& spec, const Vector& z, Vector* grad_out) {
    const std::size_t k = spec.anchor_count();
    Tape tape;
    Var values = tape.input(Matrix::col_vector(Vector(z.begin(), z.begin() + k)));
    Var action = tape.input(Matrix::col_vector(Vector(z.begin() + k, z.end())));
    Var obj = spec.build_mean_reduction(tape, values, action);
    if (grad_out) {
        tape.backward(obj);
        const Vector gv = tape.grad(values).to_vector();
        const Vector ga = tape.grad(action).to_vector();
        grad_out->clear();
        grad_out->insert(grad_out->end(), gv.begin(), gv.end());
        grad_out->insert(grad_out->end(), ga.begin(), ga.end());
    }
    return tape.value(obj).scalar();
}

bool near_topk_kink(const Vector& action, std::size_t k, std::size_t d, double cap) {
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = action[i * d + c] - action[j * d + c];
                d2 += diff * diff;
            }
            const double dist = std::sqrt(d2);
            if (dist < 1e-3 || std::abs(dist - cap) < 1e-3) return true;
        }
    return false;
}

CheckReport gradcheck_family(const std::string& name, const LossSpec& spec, std::size_t d,
                             int instances, double tolerance, bool topk_kinks, double cap,
                             std::uint64_t salt) {
    const std::size_t k = spec.anchor_count();
    const std::size_t adim = spec.action_dim();
    double worst = 0.0;
    int done = 0;
    std::uint64_t attempt = 0;
    while (done < instances && attempt < 50u * instances) {
        RngStream rng(splitmix64(salt + attempt));
        ++attempt;
        Vector z(k + adim);
        for (std::size_t i = 0; i < k; ++i) z[i] = rng.normal();
        const bool logits = spec.anchors_fixed();
        for (std::size_t i = 0; i < adim; ++i)
            z[k + i] = logits ? 2.0 * rng.normal() : rng.uniform(0.05, 0.95);
        if (topk_kinks && near_topk_kink(Vector(z.begin() + k, z.end()), k, d, cap)) continue;
        Vector analytic;
        reduction_at(spec, z, &analytic);
        const Vector numeric = finite_diff_gradient(
            [&](const Vector& zz) { return reduction_at(spec, zz, nullptr); }, z);
        worst = std::max(worst, gradient_rel_error(analytic, numeric));
        ++done;
    }
    CheckReport rep;
    rep.name = "gradcheck " + name;
    rep.passed = done == instances && worst <= tolerance;
    std::ostringstream os;
    os << done << " instances, max rel err " << worst;
    rep.detail = os.str();
    return rep;
}

GpPosterior seeded_state_2d(std::uint64_t seed, std::size_t n_obs, double noise_variance) {
    RngStream rng(seed);
    RngStream xr = rng.fork(1);
    Dataset data;
    data.inputs = Matrix(n_obs, 2);
    for (std::size_t i = 0; i < n_obs; ++i) {
        data.inputs(i, 0) = xr.uniform();
        data.inputs(i, 1) = xr.uniform();
    }
    const KernelParams prior_params = KernelParams::isotropic(2, 0.3, 1.0, 0.0);
    GpPosterior prior(Dataset{Matrix(0, 2), {}}, prior_params);
    const JointGaussian jg = prior.joint_posterior(data.inputs);
    Vector f = sample_values(jg, rng.fork(2).normal_vector(n_obs));
    RngStream nr = rng.fork(3);
    data.outputs.resize(n_obs);
    for (std::size_t i = 0; i < n_obs; ++i)
        data.outputs[i] = f[i] + std::sqrt(noise_variance) * nr.normal();
    return GpPosterior(std::move(data), KernelParams::isotropic(2, 0.3, 1.0, noise_variance));
}

CheckReport gradcheck_ehig(int instances, double tolerance) {
    double worst = 0.0;
    int done = 0;
    for (int inst = 0; inst < instances; ++inst) {
        const bool mlse_case = inst % 4 == 3;
        GpPosterior gp = seeded_state_2d(9100 + inst, 4, 1e-4);
        const Box box = unit_box(2);
        std::unique_ptr<LossSpec> spec;
        if (mlse_case) {
            MultiLevelSetHyper h;
            h.grid = regular_grid(box, 3);
            h.thresholds = {-0.3, 0.4};
            spec = make_mlse_loss(std::move(h));
        } else {
            TopKDiversityHyper h;
            h.k = 2;
            h.distance_weight = 0.5;
            h.distance_cap = 0.6;
            spec = make_topk_diversity_loss(h, 2);
        }
        RngStream rng(9500 + inst);
        const int m_count = 2;
        Vector lambda = rng.fork(1).normal_vector(m_count);
        Matrix eps(spec->anchor_count(), 4);
        RngStream er = rng.fork(2);
        for (std::size_t i = 0; i < eps.size(); ++i) eps.data()[i] = er.normal();
        EhigProblem problem(gp, *spec, box, lambda, eps, kDefaultJitter);

        RngStream zr = rng.fork(3);
        Vector z;
        z.push_back(zr.uniform(0.1, 0.9));
        z.push_back(zr.uniform(0.1, 0.9));
        for (int m = 0; m < m_count; ++m)
            for (std::size_t i = 0; i < spec->action_dim(); ++i)
                z.push_back(mlse_case ? zr.normal() : zr.uniform(0.1, 0.9));

        auto unpack_eval = [&](const Vector& zz, Vector* grad) {
            Vector x(zz.begin(), zz.begin() + 2);
            std::vector<Vector> actions(m_count);
            const std::size_t adim = spec->action_dim();
            for (int m = 0; m < m_count; ++m)
                actions[m].assign(zz.begin() + 2 + m * adim, zz.begin() + 2 + (m + 1) * adim);
            problem.set_state(x, actions);
            if (!grad) return problem.objective();
            Vector gx;
            std::vector<Vector> ga;
            const double v = problem.objective_grad(gx, ga);
            grad->assign(gx.begin(), gx.end());
            for (const Vector& g : ga) grad->insert(grad->end(), g.begin(), g.end());
            return v;
        };

        Vector analytic;
        unpack_eval(z, &analytic);
        const Vector numeric =
            finite_diff_gradient([&](const Vector& zz) { return unpack_eval(zz, nullptr); }, z);
        worst = std::max(worst, gradient_rel_error(analytic, numeric));
        ++done;
    }
    CheckReport rep;
    rep.name = "gradcheck ehig_objective";
    rep.passed = done == instances && worst <= tolerance;
    std::ostringstream os;
    os << done << " instances, max rel err " << worst;
    rep.detail = os.str();
    return rep;
}

}  // namespace

CheckSummary run_gradcheck(int instances, double tolerance) {
    CheckSummary summary;
    {
        TopKDiversityHyper h;
        h.k = 3;
        h.distance_weight = 0.7;
        h.distance_cap = 0.8;
        auto spec = make_topk_diversity_loss(h, 2);
        summary.checks.push_back(gradcheck_family("topk_diversity", *spec, 2, instances, tolerance,
                                                  true, h.distance_cap, 11000));
    }
    {
        KGuessesHyper h;
        h.k = 3;
        h.temperature = 0.05;
        auto spec = make_k_guesses_loss(h, 2);
        summary.checks.push_back(
            gradcheck_family("k_guesses_smooth", *spec, 2, instances, tolerance, false, 0, 12000));
    }
    {
        MultiLevelSetHyper h;
        Box b = unit_box(2);
        h.grid = regular_grid(b, 3);
        h.thresholds = {-0.3, 0.4};
        auto spec = make_mlse_loss(std::move(h));
        summary.checks.push_back(
            gradcheck_family("mlse", *spec, 2, instances, tolerance, false, 0, 13000));
    }
    {
        SequenceHyper h;
        h.targets = {-0.5, 0.1, 0.6};
        auto spec = make_sequence_loss(std::move(h), 2);
        summary.checks.push_back(
            gradcheck_family("sequence", *spec, 2, instances, tolerance, false, 0, 14000));
    }
    {
        auto spec = make_neg_value_loss(2);
        summary.checks.push_back(
            gradcheck_family("neg_value", *spec, 2, instances, tolerance, false, 0, 15000));
    }
    summary.checks.push_back(gradcheck_ehig(std::max(20, instances), tolerance));

    summary.required = static_cast<int>(summary.checks.size());
    for (const CheckReport& c : summary.checks)
        if (c.passed) ++summary.passed_count;
    return summary;
}

CheckSummary run_ei_oracle(int seeds, int n_fantasies, int grid_points) {
    CheckSummary summary;
    summary.required = seeds - 1;  // >= 9/10
    const Vector grid = grid_1d(grid_points);
    for (int s = 0; s < seeds; ++s) {
        GpPosterior gp = seeded_state_1d(1000 + s, 5, 0.0);
        const std::size_t n = gp.data().size();

        // Incumbent and the query-independent first term over the past queries.
        double f_star = -std::numeric_limits<double>::infinity();
        std::vector<Vector> past(n, Vector(1));
        for (std::size_t i = 0; i < n; ++i) {
            past[i][0] = gp.data().inputs(i, 0);
            f_star = std::max(f_star, gp.predict(past[i]).mean);
        }
        const double h_before = -f_star;

        RngStream lam_rng(2000 + s);
        Vector lambda = stratified_normal_vector(lam_rng, n_fantasies);

        Vector ehig_mc(grid.size()), se(grid.size()), ei(grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Vector x{grid[g]};
            Vector h_after(lambda.size());
            for (std::size_t m = 0; m < lambda.size(); ++m) {
                const double ybar = gp.fantasy_observation(x, lambda[m]);
                const GpPosterior fantasy = gp.fantasize(x, ybar);
                double best = fantasy.predict(x).mean;
                for (const Vector& p : past) best = std::max(best, fantasy.predict(p).mean);
                h_after[m] = -best;
            }
            double mean = 0.0;
            for (double h : h_after) mean += h;
            mean /= h_after.size();
            double var = 0.0;
            for (double h : h_after) var += (h - mean) * (h - mean);
            var /= (h_after.size() - 1);
            ehig_mc[g] = h_before - mean;
            se[g] = std::sqrt(var / h_after.size());
            ei[g] = ei_analytic(x, gp, f_star);
        }

        double mc_mean = 0.0, ei_mean = 0.0, se2_mean = 0.0;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            mc_mean += ehig_mc[g];
            ei_mean += ei[g];
            se2_mean += se[g] * se[g];
        }
        mc_mean /= grid.size();
        ei_mean /= grid.size();
        se2_mean /= grid.size();

        double worst_ratio = 0.0;
        bool ok = true;
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double dev = std::abs((ehig_mc[g] - mc_mean) - (ei[g] - ei_mean));
            const double bound = 3.0 * std::sqrt(se[g] * se[g] + se2_mean);
            worst_ratio = std::max(worst_ratio, bound > 0 ? dev / bound : 0.0);
            if (dev > bound) ok = false;
        }
        CheckReport rep;
        rep.name = "ei seed " + std::to_string(s);
        rep.passed = ok;
        std::ostringstream os;
        os << "max |dev| / (3 pooled SE) = " << worst_ratio;
        rep.detail = os.str();
        summary.checks.push_back(rep);
        if (ok) ++summary.passed_count;
    }
    return summary;
}

CheckSummary run_kg_oracle(int seeds, int grid_points, int nested_draws) {
    CheckSummary summary;
    summary.required = seeds - 2;  // >= 8/10
    const Vector grid = grid_1d(grid_points);
    const double cell = 1.0 / (grid_points - 1);
    for (int s = 0; s < seeds; ++s) {
        GpPosterior gp = seeded_state_1d(3000 + s, 5, 1e-4);

        RngStream lam_rng(3500 + s);
        Vector lambda = stratified_normal_vector(lam_rng, nested_draws);

        std::size_t best_idx = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Vector x{grid[g]};
            double acc = 0.0;
            for (double lam : lambda) {
                const double ybar = gp.fantasy_observation(x, lam);
                const GpPosterior fantasy = gp.fantasize(x, ybar);
                double maxmean = -std::numeric_limits<double>::infinity();
                for (double gx : grid)
                    maxmean = std::max(maxmean, fantasy.predict(Vector{gx}).mean);
                acc += maxmean;
            }
            acc /= lambda.size();
            if (acc > best_val) {
                best_val = acc;
                best_idx = g;
            }
        }

        OptimizerConfig opt;
        opt.n_fantasies = 256;
        opt.n_samples = 4;
        opt.restarts = 10;
        opt.steps = 80;
        auto spec = make_neg_value_loss(1);
        const AcquisitionResult acq =
            optimize_ehig(gp, *spec, unit_box(1), opt, RngStream(4000 + s));

        const double dist = std::abs(acq.chosen_x[0] - grid[best_idx]);
        CheckReport rep;
        rep.name = "kg seed " + std::to_string(s);
        rep.passed = dist <= cell + 1e-9;
        std::ostringstream os;
        os << "one-shot x " << acq.chosen_x[0] << ", nested argmax " << grid[best_idx]
           << ", |diff| " << dist << " (cell " << cell << ")";
        rep.detail = os.str();
        summary.checks.push_back(rep);
        if (rep.passed) ++summary.passed_count;
    }
    return summary;
}

CheckSummary run_pi_oracle(int seeds, int n_fantasies, int grid_points) {
    CheckSummary summary;
    summary.required = seeds - 1;  // >= 9/10
    const Vector grid = grid_1d(grid_points);
    for (int s = 0; s < seeds; ++s) {
        GpPosterior gp = seeded_state_1d(5000 + s, 5, 0.0);
        double tau = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gp.data().size(); ++i)
            tau = std::max(tau, gp.predict(Vector{gp.data().inputs(i, 0)}).mean);

        RngStream lam_rng(5500 + s);
        Vector lambda = stratified_normal_vector(lam_rng, n_fantasies);

        std::size_t mc_idx = 0, an_idx = 0;
        double mc_best = -std::numeric_limits<double>::infinity();
        double an_best = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Vector x{grid[g]};
            double acc = 0.0;
            for (double lam : lambda) {
                const double ybar = gp.fantasy_observation(x, lam);
                const GpPosterior fantasy = gp.fantasize(x, ybar);
                acc += pi_analytic(x, fantasy, tau);  // expected indicator under the fantasy
            }
            acc /= lambda.size();
            if (acc > mc_best) {
                mc_best = acc;
                mc_idx = g;
            }
            const double an = pi_analytic(x, gp, tau);
            if (an > an_best) {
                an_best = an;
                an_idx = g;
            }
        }
        CheckReport rep;
        rep.name = "pi seed " + std::to_string(s);
        rep.passed = mc_idx == an_idx;
        std::ostringstream os;
        os << "mc argmax " << grid[mc_idx] << ", analytic argmax " << grid[an_idx];
        rep.detail = os.str();
        summary.checks.push_back(rep);
        if (rep.passed) ++summary.passed_count;
    }
    return summary;
}

CheckSummary run_entropy_decrease_check(int pairs_per_family) {
    CheckSummary summary;
    const Box box = unit_box(1);
    SolverConfig solver;
    solver.restarts = 4;
    solver.steps = 60;
    solver.n_samples = 64;
    const int fantasy_draws = 8;

    std::vector<std::pair<std::string, std::function<std::unique_ptr<LossSpec>()>>> families;
    families.emplace_back("topk", [] {
        TopKDiversityHyper h;
        h.k = 2;
        h.distance_weight = 0.5;
        h.distance_cap = 0.5;
        return make_topk_diversity_loss(h, 1);
    });
    families.emplace_back("kguesses", [] {
        KGuessesHyper h;
        h.k = 2;
        return make_k_guesses_loss(h, 1);
    });
    families.emplace_back("mlse", [] {
        MultiLevelSetHyper h;
        h.grid = Matrix(9, 1);
        for (int i = 0; i < 9; ++i) h.grid(i, 0) = i / 8.0;
        h.thresholds = {-0.3, 0.4};
        return make_mlse_loss(std::move(h));
    });
    families.emplace_back("sequence", [] {
        SequenceHyper h;
        h.targets = {-0.5, 0.5};
        return make_sequence_loss(std::move(h), 1);
    });
    families.emplace_back("negvalue", [] { return make_neg_value_loss(1); });

    for (std::size_t fam = 0; fam < families.size(); ++fam) {
        auto spec = families[fam].second();
        for (int pair = 0; pair < pairs_per_family; ++pair) {
            const std::uint64_t seed = 7000 + 100 * fam + pair;
            GpPosterior gp = seeded_state_1d(seed, 5, 1e-4);
            RngStream rng(seed ^ 0xABCDEF);
            const Vector xq{rng.fork(0).uniform()};

            const HEntropyResult before = h_entropy(gp, *spec, box, solver, rng.fork(1));
            RngStream lam_rng = rng.fork(2);
            Vector h_after(fantasy_draws);
            for (int l = 0; l < fantasy_draws; ++l) {
                const double ybar = gp.fantasy_observation(xq, lam_rng.normal());
                const GpPosterior fantasy = gp.fantasize(xq, ybar);
                h_after[l] = h_entropy(fantasy, *spec, box, solver, rng.fork(10 + l)).value;
            }
            double mean = 0.0;
            for (double h : h_after) mean += h;
            mean /= fantasy_draws;
            double var = 0.0;
            for (double h : h_after) var += (h - mean) * (h - mean);
            var /= (fantasy_draws - 1);
            const double se_after = std::sqrt(var / fantasy_draws);
            const double combined = std::sqrt(before.stderr * before.stderr + se_after * se_after);
            const double gain = before.value - mean;

            CheckReport rep;
            rep.name = families[fam].first + " pair " + std::to_string(pair);
            rep.passed = gain >= -3.0 * combined;
            std::ostringstream os;
            os << "gain " << gain << ", 3*SE " << 3.0 * combined;
            rep.detail = os.str();
            summary.checks.push_back(rep);
            if (rep.passed) ++summary.passed_count;
        }
    }
    summary.required = static_cast<int>(summary.checks.size());
    return summary;
}

}  // namespace hes
