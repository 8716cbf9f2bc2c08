#pragma once

#include <string>

#include "hes/acquisition.hpp"

namespace hes {

struct CheckReport {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CheckSummary {
    std::vector<CheckReport> checks;
    int passed_count = 0;
    int required = 0;

    bool passed() const { return passed_count >= required; }
};

// Central finite differences of a scalar function, step h per coordinate.
Vector finite_diff_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                            double step = 1e-5);

// max-norm relative error between two gradients.
double gradient_rel_error(const Vector& got, const Vector& want);

// Finite-difference checks of every loss reduction (with respect to both the
// function values and the action) and of the full one-shot acquisition
// objective with respect to (x, a_1..a_M). All checks must pass.
CheckSummary run_gradcheck(int instances = 20, double tolerance = 1e-4);

// Expected-improvement equivalence: on seeded 1-D states, the mean-centered
// Monte Carlo acquisition with the discrete past-query action set tracks the
// mean-centered closed form within 3 pooled standard errors per grid point.
CheckSummary run_ei_oracle(int seeds = 10, int n_fantasies = 2048, int grid_points = 101);

// Knowledge-gradient equivalence: the one-shot argmax lands within one grid
// cell of a brute-force nested Monte Carlo argmax.
CheckSummary run_kg_oracle(int seeds = 10, int grid_points = 51, int nested_draws = 64);

// Probability-of-improvement equivalence: the indicator-loss acquisition
// argmax (enumeration over the grid) matches the closed-form argmax.
CheckSummary run_pi_oracle(int seeds = 10, int n_fantasies = 4096, int grid_points = 101);

// Expected uncertainty reduction: for seeded (state, query) pairs and every
// loss family, the estimated entropy never increases in expectation beyond
// Monte Carlo slack.
CheckSummary run_entropy_decrease_check(int pairs_per_family = 20);

// Deterministic 1-D test state: inputs drawn uniformly on [0, 1], outputs
// drawn from the GP prior (lengthscale 0.2, unit signal) plus noise.
GpPosterior seeded_state_1d(std::uint64_t seed, std::size_t n_obs, double noise_variance);

}  // namespace hes
