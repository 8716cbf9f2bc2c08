#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hes/linalg.hpp"

namespace hes {

// Splittable random stream. The engine is std::mt19937_64 (bit-exact across
// platforms); normal draws use Box-Muller on raw uniforms instead of
// std::normal_distribution, whose output is implementation-defined.
//
// Split scheme: fork(salt) derives a child seed as
// splitmix64(seed ^ splitmix64(salt + golden)), so any tree of substreams is
// a pure function of the root seed and the salts along the path. Trials,
// restarts and fantasy banks each own a forked stream, which keeps results
// independent of execution order.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    RngStream fork(std::uint64_t salt) const;

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller (two uniforms per draw).
    double normal();
    Vector normal_vector(std::size_t n);

    std::uint64_t next_u64() { return engine_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Antithetic standard-normal banks: draws come in (z, -z) pairs so the bank
// mean is exactly zero (for even sizes). Keeps fixed-sample Monte Carlo
// objectives from rewarding spurious variance directions.
Vector antithetic_normal_vector(RngStream& rng, std::size_t n);
Matrix antithetic_normal_columns(RngStream& rng, std::size_t rows, std::size_t cols);

// Inverse standard-normal CDF (Acklam's rational approximation, ~1e-9
// absolute error).
double normal_quantile(double p);

// Randomized stratified standard-normal draws: one quantile per stratum
// (m + u_m) / n. Unbiased with far lower integration error than iid draws
// for smooth integrands.
Vector stratified_normal_vector(RngStream& rng, std::size_t n);

// First `count` points of the Halton sequence scaled to the box [lo, hi]^d,
// one prime base per dimension. Deterministic quasi-uniform candidate sets.
std::vector<Vector> halton_points(std::size_t count, const Vector& lo, const Vector& hi);

}  // namespace hes
