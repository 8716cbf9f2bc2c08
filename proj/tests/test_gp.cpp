#include <doctest.h>

#include <cmath>

#include "hes/gp.hpp"
#include "hes/oracles.hpp"

using namespace hes;

namespace {

Dataset one_point_dataset(double x, double y) {
    Dataset d;
    d.inputs = Matrix(1, 1);
    d.inputs(0, 0) = x;
    d.outputs = {y};
    return d;
}

GpPosterior unit_gp(Dataset d, double noise = 0.0) {
    return GpPosterior(std::move(d), KernelParams::isotropic(1, 1.0, 1.0, noise));
}

}  // namespace

TEST_CASE("squared-exponential kernel values") {
    const KernelParams p = KernelParams::isotropic(1, 1.0, 1.0, 0.0);
    CHECK(kernel({0.3}, {0.3}, p) == doctest::Approx(1.0));
    CHECK(kernel({0.0}, {1.0}, p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
    KernelParams doubled = p;
    doubled.signal_variance = 2.0;
    CHECK(kernel({0.2}, {1.7}, doubled) == doctest::Approx(2.0 * kernel({0.2}, {1.7}, p)));
    CHECK_THROWS_AS(kernel({0.0, 1.0}, {0.0}, p), DimensionMismatch);
}

TEST_CASE("joint posterior with empty data is the prior") {
    GpPosterior gp = unit_gp(Dataset{Matrix(0, 1), {}});
    Matrix anchor(1, 1);
    anchor(0, 0) = 0.7;
    const JointGaussian j = gp.joint_posterior(anchor);
    CHECK(j.mean[0] == doctest::Approx(0.0));
    CHECK(j.scale(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("one-point posterior matches hand-computed values") {
    // Zero prior mean: the hand-computed values condition the zero-mean GP.
    GpPosterior gp(one_point_dataset(0.0, 1.0), KernelParams::isotropic(1, 1.0, 1.0, 0.0), 0.0);
    SUBCASE("interpolation at the data point") {
        Matrix anchor(1, 1);
        const JointGaussian j = gp.joint_posterior(anchor);
        CHECK(std::abs(j.mean[0] - 1.0) <= 1e-10);
        CHECK(j.scale(0, 0) * j.scale(0, 0) <= 1e-10);
    }
    SUBCASE("one unit away") {
        Matrix anchor(1, 1);
        anchor(0, 0) = 1.0;
        const JointGaussian j = gp.joint_posterior(anchor);
        CHECK(std::abs(j.mean[0] - std::exp(-0.5)) <= 1e-10);
        CHECK(std::abs(j.scale(0, 0) * j.scale(0, 0) - (1.0 - std::exp(-1.0))) <= 1e-10);
    }
}

TEST_CASE("sample_values is the affine reparameterization") {
    JointGaussian j;
    j.mean = {0.5};
    j.scale = Matrix(1, 1, 2.0);
    CHECK(sample_values(j, {0.0})[0] == doctest::Approx(0.5));
    CHECK(sample_values(j, {1.0})[0] == doctest::Approx(2.5));
    CHECK_THROWS_AS(sample_values(j, {1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("sampled covariance matches U U^T") {
    GpPosterior gp = seeded_state_1d(31, 4, 1e-4);
    Matrix anchors(2, 1);
    anchors(0, 0) = 0.2;
    anchors(1, 0) = 0.8;
    const JointGaussian j = gp.joint_posterior(anchors);
    RngStream rng(77);
    const std::size_t n = 100000;
    double m0 = 0.0, m1 = 0.0, c00 = 0.0, c01 = 0.0, c11 = 0.0;
    std::vector<Vector> draws(n);
    for (auto& d : draws) d = sample_values(j, rng.normal_vector(2));
    for (const auto& d : draws) {
        m0 += d[0];
        m1 += d[1];
    }
    m0 /= n;
    m1 /= n;
    for (const auto& d : draws) {
        c00 += (d[0] - m0) * (d[0] - m0);
        c01 += (d[0] - m0) * (d[1] - m1);
        c11 += (d[1] - m1) * (d[1] - m1);
    }
    c00 /= n;
    c01 /= n;
    c11 /= n;
    const Matrix& u = j.scale;
    CHECK(std::abs(c00 - u(0, 0) * u(0, 0)) <= 0.05);
    CHECK(std::abs(c01 - u(1, 0) * u(0, 0)) <= 0.05);
    CHECK(std::abs(c11 - (u(1, 0) * u(1, 0) + u(1, 1) * u(1, 1))) <= 0.05);
}

TEST_CASE("fantasy observations follow the predictive distribution") {
    GpPosterior gp = unit_gp(Dataset{Matrix(0, 1), {}});
    CHECK(gp.fantasy_observation({0.4}, 0.0) == doctest::Approx(0.0));
    CHECK(gp.fantasy_observation({0.4}, 1.0) == doctest::Approx(1.0));  // prior sd 1

    GpPosterior noisy = seeded_state_1d(5, 4, 0.05);
    const Vector x{0.35};
    const auto pred = noisy.predict(x);
    const double want_var = pred.variance + noisy.params().noise_variance;
    RngStream rng(8);
    const std::size_t n = 100000;
    double mean = 0.0, var = 0.0;
    Vector draws(n);
    for (auto& d : draws) d = noisy.fantasy_observation(x, rng.normal());
    for (double d : draws) mean += d;
    mean /= n;
    for (double d : draws) var += (d - mean) * (d - mean);
    var /= n;
    const double se_mean = std::sqrt(want_var / n);
    CHECK(std::abs(mean - pred.mean) <= 3.0 * se_mean);
    const double se_var = want_var * std::sqrt(2.0 / n);
    CHECK(std::abs(var - want_var) <= 3.0 * se_var);
}

TEST_CASE("fantasize interpolates the fantasy observation") {
    GpPosterior gp = seeded_state_1d(17, 5, 0.0);
    const Vector x{0.42};
    const GpPosterior fantasy = gp.fantasize(x, 1.3);
    Matrix anchor(1, 1);
    anchor(0, 0) = x[0];
    const JointGaussian j = fantasy.joint_posterior(anchor);
    CHECK(std::abs(j.mean[0] - 1.3) <= 1e-8);
    CHECK(j.scale(0, 0) * j.scale(0, 0) <= 1e-8);
}

TEST_CASE("conditioning on the current mean leaves the mean function unchanged") {
    GpPosterior gp = seeded_state_1d(21, 5, 0.0);
    const Vector x{0.61};
    const GpPosterior fantasy = gp.fantasize(x, gp.fantasy_observation(x, 0.0));
    for (int g = 0; g <= 20; ++g) {
        const Vector t{g / 20.0};
        CHECK(std::abs(fantasy.predict(t).mean - gp.predict(t).mean) <= 1e-8);
    }
}

// The incremental route: Gaussian conditioning of the current joint on the
// new observation. Must agree with the full rebuild that fantasize performs.
TEST_CASE("rank-one conditioning equals the fantasize rebuild") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        GpPosterior gp = seeded_state_1d(900 + seed, 5, seed % 2 == 0 ? 1e-3 : 0.0);
        RngStream rng(40 + seed);
        const Vector x{rng.uniform()};
        const double lambda = rng.normal();
        const double ybar = gp.fantasy_observation(x, lambda);

        Matrix anchors(3, 1);
        anchors(0, 0) = rng.uniform();
        anchors(1, 0) = rng.uniform();
        anchors(2, 0) = rng.uniform();

        // incremental: mu + ktilde (ybar - mean_x) / v, Sigma - ktilde ktilde^T / v
        const JointGaussian base = gp.joint_posterior(anchors);
        const auto px = gp.predict(x);
        const double v = px.variance + gp.params().noise_variance;
        Vector ktilde(3);
        {
            const Vector kx = gp.kernel_vector(x);
            const Vector sx = tri_solve(gp.chol(), kx, TriSide::Lower);
            const Matrix cross = kernel_cross(anchors, gp.data().inputs, gp.params());
            const Matrix s = tri_solve_matrix(gp.chol().lower, cross.transposed(), TriSide::Lower);
            for (std::size_t i = 0; i < 3; ++i) {
                Vector ai{anchors(i, 0)};
                double corr = 0.0;
                for (std::size_t r = 0; r < gp.data().size(); ++r) corr += s(r, i) * sx[r];
                ktilde[i] = kernel(ai, x, gp.params()) - corr;
            }
        }
        Matrix base_cov(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k <= std::min(i, j); ++k)
                    s += base.scale(i, k) * base.scale(j, k);
                base_cov(i, j) = s;
            }

        const GpPosterior rebuilt = gp.fantasize(x, ybar);
        const JointGaussian after = rebuilt.joint_posterior(anchors);
        double max_diff = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            const double want = base.mean[i] + ktilde[i] * (ybar - px.mean) / v;
            max_diff = std::max(max_diff, std::abs(after.mean[i] - want));
            for (std::size_t j = 0; j < 3; ++j) {
                double got = 0.0;
                for (std::size_t k = 0; k <= std::min(i, j); ++k)
                    got += after.scale(i, k) * after.scale(j, k);
                const double want_cov = base_cov(i, j) - ktilde[i] * ktilde[j] / v;
                max_diff = std::max(max_diff, std::abs(got - want_cov));
            }
        }
        CHECK(max_diff <= 1e-8);
    }
}

TEST_CASE("noiseless interpolation at every training input") {
    GpPosterior gp = seeded_state_1d(55, 6, 0.0);
    for (std::size_t i = 0; i < gp.data().size(); ++i) {
        const Vector x{gp.data().inputs(i, 0)};
        const auto p = gp.predict(x);
        CHECK(std::abs(p.mean - gp.data().outputs[i]) <= 1e-8);
        CHECK(p.variance <= 1e-8);
    }
}

TEST_CASE("posterior variance never exceeds the prior variance") {
    GpPosterior gp = seeded_state_1d(66, 6, 1e-3);
    RngStream rng(9);
    for (int i = 0; i < 50; ++i) {
        const auto p = gp.predict({rng.uniform()});
        CHECK(p.variance <= gp.params().signal_variance + 1e-10);
    }
}

TEST_CASE("two fantasize steps commute with the two-point batch rebuild") {
    GpPosterior gp = seeded_state_1d(71, 4, 1e-4);
    const Vector x1{0.15}, x2{0.85};
    const double y1 = 0.4, y2 = -0.2;
    const GpPosterior two_step = gp.fantasize(x1, y1).fantasize(x2, y2);
    const GpPosterior batch(
        gp.data().augmented(x1, y1).augmented(x2, y2), gp.params(), gp.prior_mean());
    for (int g = 0; g <= 20; ++g) {
        const Vector t{g / 20.0};
        CHECK(std::abs(two_step.predict(t).mean - batch.predict(t).mean) <= 1e-8);
        CHECK(std::abs(two_step.predict(t).variance - batch.predict(t).variance) <= 1e-8);
    }
}

TEST_CASE("hyperparameter fitting falls back on constant outputs") {
    Dataset d;
    d.inputs = Matrix(4, 1);
    for (int i = 0; i < 4; ++i) d.inputs(i, 0) = i * 0.2;
    d.outputs = {1.0, 1.0, 1.0, 1.0};
    const HyperFitResult r = fit_hyperparams(d, HyperBounds::from_data(d), {}, RngStream(1));
    CHECK(r.degenerate_fallback);
    CHECK(r.params.signal_variance > 0.0);
}

TEST_CASE("fitted likelihood dominates the default start") {
    GpPosterior state = seeded_state_1d(81, 20, 0.01);
    const Dataset& d = state.data();
    double mean = 0.0;
    for (double y : d.outputs) mean += y;
    mean /= d.size();
    const HyperFitResult r = fit_hyperparams(d, HyperBounds::from_data(d), {}, RngStream(2));
    CHECK_FALSE(r.degenerate_fallback);
    const double at_default =
        log_marginal_likelihood(d, KernelParams::isotropic(1, 0.2, 1.0, 1e-4), mean);
    CHECK(r.log_marginal >= at_default - 1e-9);
    CHECK(r.log_marginal == doctest::Approx(log_marginal_likelihood(d, r.params, mean)));
}

TEST_CASE("lengthscale recovery on data drawn from a known GP") {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(1000 + seed);
        const std::size_t n = 50;
        Dataset d;
        d.inputs = Matrix(n, 1);
        for (std::size_t i = 0; i < n; ++i) d.inputs(i, 0) = rng.uniform(0.0, 5.0);
        const KernelParams truth = KernelParams::isotropic(1, 1.0, 1.0, 0.0);
        GpPosterior prior(Dataset{Matrix(0, 1), {}}, truth);
        const Vector f = sample_values(prior.joint_posterior(d.inputs), rng.normal_vector(n));
        d.outputs.resize(n);
        for (std::size_t i = 0; i < n; ++i) d.outputs[i] = f[i] + 0.1 * rng.normal();

        const HyperFitResult r =
            fit_hyperparams(d, HyperBounds::from_data(d), {}, RngStream(2000 + seed));
        if (std::abs(std::log(r.params.lengthscales[0])) <= 0.5) ++hits;
    }
    CHECK(hits >= 7);
}
