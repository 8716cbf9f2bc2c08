#include <doctest.h>

#include <cmath>

#include "hes/benchfuncs.hpp"
#include "hes/descent.hpp"
#include "hes/oracles.hpp"
#include "hes/posterior_graph.hpp"

using namespace hes;

namespace {

Box unit_box(std::size_t d) {
    Box b;
    b.lo.assign(d, 0.0);
    b.hi.assign(d, 1.0);
    return b;
}

}  // namespace

TEST_CASE("top-k diversity loss hand cases") {
    TopKDiversityHyper h;
    h.k = 2;
    h.distance_weight = 1.0;
    h.distance_cap = std::numeric_limits<double>::infinity();
    Matrix pts(2, 1);
    pts(1, 0) = 1.0;
    CHECK(topk_diversity_loss({1.0, 2.0}, pts, h) == doctest::Approx(-4.0));

    h.k = 1;
    CHECK(topk_diversity_loss({3.0}, Matrix(1, 1, 0.2), h) == doctest::Approx(-3.0));

    h.k = 2;
    h.distance_weight = 0.0;
    CHECK(topk_diversity_loss({1.0, 2.0}, pts, h) == doctest::Approx(-3.0));
}

TEST_CASE("k-guesses loss hand cases") {
    CHECK(k_guesses_loss({1.0, 2.0}, MaxMode::Hard) == doctest::Approx(-2.0));
    CHECK(k_guesses_loss({1.0}, MaxMode::Hard) == doctest::Approx(-1.0));
    CHECK(k_guesses_loss({1.0}, MaxMode::Smooth, 0.05) == doctest::Approx(-1.0));
    RngStream rng(4);
    for (int i = 0; i < 20; ++i) {
        const Vector v = rng.normal_vector(3);
        CHECK(k_guesses_loss(v, MaxMode::Smooth, 0.05) <= k_guesses_loss(v, MaxMode::Hard));
    }
}

TEST_CASE("mlse loss hand cases") {
    SUBCASE("saturated logits cancel on symmetric values") {
        Matrix logits(2, 1, 30.0);
        CHECK(mlse_loss({1.0, -1.0}, logits, {0.0}) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("half logits halve the all-ones loss") {
        Matrix saturated(2, 1, 500.0);
        Matrix half(2, 1, 0.0);
        const double full = mlse_loss({1.0, 1.0}, saturated, {0.0});
        CHECK(full == doctest::Approx(-2.0));
        CHECK(mlse_loss({1.0, 1.0}, half, {0.0}) == doctest::Approx(0.5 * full));
    }
    SUBCASE("pointwise optimum is the indicator labeling") {
        RngStream rng(6);
        const Vector thresholds{-0.4, 0.3};
        for (int trial = 0; trial < 20; ++trial) {
            const Vector f = rng.normal_vector(5);
            Matrix best(5, 2);
            for (std::size_t x = 0; x < 5; ++x)
                for (std::size_t i = 0; i < 2; ++i)
                    best(x, i) = f[x] > thresholds[i] ? 30.0 : -30.0;
            const double opt = mlse_loss(f, best, thresholds);
            Matrix other(5, 2);
            for (std::size_t k = 0; k < other.size(); ++k) other.data()[k] = rng.normal();
            CHECK(opt <= mlse_loss(f, other, thresholds) + 1e-9);
        }
    }
}

TEST_CASE("sequence loss hand cases") {
    CHECK(sequence_loss({1.0, 2.0}, {1.0, 2.0}) == doctest::Approx(0.0));
    CHECK(sequence_loss({3.0}, {1.0}) == doctest::Approx(4.0));
    CHECK(sequence_loss({1.0, 5.0}, {0.0, 4.0}) ==
          doctest::Approx(sequence_loss({5.0, 1.0}, {4.0, 0.0})));
    RngStream rng(7);
    for (int i = 0; i < 10; ++i)
        CHECK(sequence_loss(rng.normal_vector(3), rng.normal_vector(3)) >= 0.0);
}

TEST_CASE("negative-value loss hand cases") {
    CHECK(neg_value_loss({2.0}) == doctest::Approx(-2.0));
    CHECK(neg_value_loss({3.0}) < neg_value_loss({2.0}));
    CHECK(neg_value_loss({2.0 + 0.7}) == doctest::Approx(neg_value_loss({2.0}) - 0.7));
    CHECK_THROWS_AS(neg_value_loss({1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("loss decomposition: anchored evaluation equals the direct formula") {
    // top-k with diversity on a quadratic black box
    auto f = [](const Vector& x) { return -(x[0] - 0.3) * (x[0] - 0.3) + x[1]; };
    TopKDiversityHyper h;
    h.k = 3;
    h.distance_weight = 0.7;
    h.distance_cap = 0.5;
    auto spec = make_topk_diversity_loss(h, 2);
    RngStream rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        Vector action(6);
        for (double& a : action) a = rng.uniform();
        // direct: evaluate the formula from scratch
        double direct = 0.0;
        for (int i = 0; i < 3; ++i) direct -= f({action[2 * i], action[2 * i + 1]});
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                const double dx = action[2 * i] - action[2 * j];
                const double dy = action[2 * i + 1] - action[2 * j + 1];
                direct -= h.distance_weight *
                          std::min(std::sqrt(dx * dx + dy * dy), h.distance_cap);
            }
        CHECK(true_loss(f, *spec, action) == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("true loss of a sequence placed exactly on its targets is zero") {
    auto f = [](const Vector& x) { return 2.0 * x[0]; };
    SequenceHyper h;
    h.targets = {0.4, 1.0, 1.6};
    auto spec = make_sequence_loss(h, 1);
    const Vector action{0.2, 0.5, 0.8};  // f(a_i) == targets
    CHECK(true_loss(f, *spec, action) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("true top-k loss at the alpine-2 maximizer") {
    BlackBox bb = make_alpine_blackbox(2, 0.0);
    // grid argmax oracle
    const Matrix grid = regular_grid(bb.box(), 201);
    double best = -1.0;
    Vector arg(2);
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        const Vector x{grid(i, 0), grid(i, 1)};
        const double v = bb.eval_true(x);
        if (v > best) {
            best = v;
            arg = x;
        }
    }
    TopKDiversityHyper h;
    h.k = 2;
    h.distance_weight = 0.0;
    h.distance_cap = 1.0;
    auto spec = make_topk_diversity_loss(h, 2);
    const Vector action{arg[0], arg[1], arg[0], arg[1]};
    CHECK(true_loss(bb.truth(), *spec, action) == doctest::Approx(-2.0 * best).epsilon(1e-12));
}

TEST_CASE("reduction of the reparameterized joint posterior is differentiable") {
    // l'(mu(a) + U(a) eps, a) for the top-k loss on a seeded 2-point GP state
    GpPosterior gp = seeded_state_1d(123, 2, 1e-4);
    TopKDiversityHyper h;
    h.k = 2;
    h.distance_weight = 0.5;
    h.distance_cap = 0.6;
    auto spec = make_topk_diversity_loss(h, 1);
    RngStream rng(5);
    const Vector eps = rng.normal_vector(2);

    auto objective = [&](const Vector& action, Vector* grad) {
        Tape tape;
        Var a = tape.input(Matrix::col_vector(action));
        GpTapeConstants c = gp_tape_constants(tape, gp);
        JointNodes joint = joint_posterior_nodes(tape, c, spec->build_anchor_points(tape, a));
        Var u = tape.cholesky_(joint.cov, kDefaultJitter);
        Var values = tape.add(joint.mean, tape.matmul_(u, tape.constant(Matrix::col_vector(eps))));
        Var obj = spec->build_mean_reduction(tape, values, a);
        if (grad) {
            tape.backward(obj);
            *grad = tape.grad(a).to_vector();
        }
        return tape.value(obj).scalar();
    };
    for (int trial = 0; trial < 20; ++trial) {
        RngStream tr(400 + trial);
        Vector action{tr.uniform(0.1, 0.9), tr.uniform(0.1, 0.9)};
        if (std::abs(action[0] - action[1]) < 5e-3) continue;  // sqrt kink
        Vector analytic;
        objective(action, &analytic);
        const Vector numeric = finite_diff_gradient(
            [&](const Vector& z) { return objective(z, nullptr); }, action);
        CHECK(gradient_rel_error(analytic, numeric) <= 1e-4);
    }
}

TEST_CASE("discrete bayes action enumerates the best posterior mean") {
    GpPosterior gp = seeded_state_1d(222, 6, 1e-4);
    const Matrix& candidates = gp.data().inputs;
    const BayesActionResult r = bayes_action_discrete(gp, candidates);
    double best = -1e18;
    Vector arg;
    for (std::size_t i = 0; i < candidates.rows(); ++i) {
        const Vector x{candidates(i, 0)};
        const double m = gp.predict(x).mean;
        if (m > best) {
            best = m;
            arg = x;
        }
    }
    CHECK(r.action[0] == doctest::Approx(arg[0]));
    CHECK(r.expected_loss == doctest::Approx(-best));
}

TEST_CASE("continuous neg-value bayes action finds the posterior mean argmax") {
    GpPosterior gp = seeded_state_1d(333, 6, 1e-4);
    auto spec = make_neg_value_loss(1);
    SolverConfig solver;
    solver.restarts = 6;
    solver.steps = 120;
    const BayesActionResult r = bayes_action(gp, *spec, unit_box(1), solver, RngStream(3));
    double best = -1e18, arg = 0.0;
    for (int g = 0; g <= 1000; ++g) {
        const double x = g / 1000.0;
        const double m = gp.predict({x}).mean;
        if (m > best) {
            best = m;
            arg = x;
        }
    }
    CHECK(std::abs(r.action[0] - arg) <= 0.02);
}

TEST_CASE("mlse bayes action recovers the posterior-mean labeling") {
    GpPosterior gp = seeded_state_1d(444, 8, 1e-4);
    MultiLevelSetHyper h;
    h.grid = Matrix(25, 1);
    for (int i = 0; i < 25; ++i) h.grid(i, 0) = i / 24.0;
    h.thresholds = {-0.2, 0.4};
    const Vector thresholds = h.thresholds;
    const Matrix grid = h.grid;
    auto spec = make_mlse_loss(std::move(h));
    SolverConfig solver;
    solver.restarts = 4;
    solver.steps = 150;
    const BayesActionResult r = bayes_action(gp, *spec, unit_box(1), solver, RngStream(9));
    std::size_t matches = 0, total = 0;
    for (std::size_t x = 0; x < grid.rows(); ++x) {
        const double mean = gp.predict({grid(x, 0)}).mean;
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            ++total;
            const bool want = mean > thresholds[i];
            const bool got = r.action[x * thresholds.size() + i] > 0.0;
            if (want == got) ++matches;
        }
    }
    CHECK(static_cast<double>(matches) / total >= 0.95);
}

TEST_CASE("projected descent trace is monotone non-increasing") {
    // quadratic bowl with box constraints
    auto value = [](const Vector& z) {
        return (z[0] - 0.8) * (z[0] - 0.8) + 2.0 * (z[1] + 0.3) * (z[1] + 0.3);
    };
    auto value_grad = [&](const Vector& z, Vector& g) {
        g = {2.0 * (z[0] - 0.8), 4.0 * (z[1] + 0.3)};
        return value(z);
    };
    Box b;
    b.lo = {0.0, 0.0};
    b.hi = {1.0, 1.0};
    const DescentResult r = projected_descent(value, value_grad, {0.1, 0.9}, b, 100, 0.1);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
    CHECK(r.point[0] == doctest::Approx(0.8).epsilon(1e-2));
    CHECK(r.point[1] == doctest::Approx(0.0));  // clamped at the box
    CHECK(r.improved);
}

TEST_CASE("bayes action flags when no restart can improve") {
    // Empty-data GP: the neg-value objective is constant (prior mean zero,
    // unit variance everywhere, antithetic bank), so no step helps.
    GpPosterior gp(Dataset{Matrix(0, 1), {}}, KernelParams::isotropic(1, 1.0, 1.0, 0.0));
    auto spec = make_neg_value_loss(1);
    SolverConfig solver;
    solver.restarts = 3;
    solver.steps = 30;
    const BayesActionResult r = bayes_action(gp, *spec, unit_box(1), solver, RngStream(17));
    CHECK(r.no_improvement);
    CHECK(r.expected_loss == doctest::Approx(0.0).epsilon(1e-12));
}
