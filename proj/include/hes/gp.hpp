#pragma once

#include <optional>

#include "hes/linalg.hpp"
#include "hes/rng.hpp"

namespace hes {

// Squared-exponential kernel hyperparameters. One lengthscale per input
// dimension; noise_variance may be exactly zero for noiseless models.
struct KernelParams {
    Vector lengthscales;
    double signal_variance = 1.0;
    double noise_variance = 0.0;

    static KernelParams isotropic(std::size_t dim, double lengthscale, double signal_variance,
                                  double noise_variance);
    void validate() const;
};

struct Dataset {
    Matrix inputs;   // n x d
    Vector outputs;  // n

    std::size_t size() const { return outputs.size(); }
    std::size_t dim() const { return inputs.cols(); }
    Dataset augmented(const Vector& x, double y) const;
};

// Mean vector and lower-triangular scale U with U U^T equal to the posterior
// covariance at the anchor points; the carrier of reparameterized samples.
struct JointGaussian {
    Vector mean;
    Matrix scale;

    std::size_t dim() const { return mean.size(); }
};

double kernel(const Vector& x, const Vector& y, const KernelParams& params);
Matrix kernel_cross(const Matrix& a, const Matrix& b, const KernelParams& params);

// Returns mean + scale * eps, deterministic in both arguments.
Vector sample_values(const JointGaussian& j, const Vector& eps);

// Exact GP regression state: dataset, hyperparameters, cached Cholesky factor
// of K(X,X) + noise I, and the precomputed solve against the centered
// outputs. Immutable after construction.
class GpPosterior {
public:
    GpPosterior(Dataset data, KernelParams params);
    GpPosterior(Dataset data, KernelParams params, double prior_mean);

    const Dataset& data() const { return data_; }
    const KernelParams& params() const { return params_; }
    double prior_mean() const { return prior_mean_; }
    const CholFactor& chol() const { return chol_; }
    const Vector& alpha() const { return alpha_; }
    std::size_t dim() const { return data_.inputs.cols(); }

    Vector kernel_vector(const Vector& x) const;  // K(X, x)

    struct Prediction {
        double mean;
        double variance;  // of f(x), excludes observation noise
    };
    Prediction predict(const Vector& x) const;

    JointGaussian joint_posterior(const Matrix& anchors) const;

    // mean(x) + sqrt(var(x) + noise) * lambda: the deterministic map from a
    // standard-normal draw to a predictive observation.
    double fantasy_observation(const Vector& x, double lambda) const;

    // Posterior conditioned on the extra observation. Full rebuild on the
    // augmented dataset; the prior mean stays that of the parent model, so
    // conditioning on the current mean leaves the mean function unchanged.
    GpPosterior fantasize(const Vector& x, double ybar) const;

private:
    void build();

    Dataset data_;
    KernelParams params_;
    double prior_mean_ = 0.0;
    CholFactor chol_;
    Vector alpha_;
};

double log_marginal_likelihood(const Dataset& data, const KernelParams& params,
                               double prior_mean);

// Box bounds for the log-parameter ascent.
struct HyperBounds {
    double log_lengthscale_lo;
    double log_lengthscale_hi;
    double log_signal_lo;
    double log_signal_hi;
    double log_noise_lo;
    double log_noise_hi;

    static HyperBounds from_data(const Dataset& data);
};

struct HyperFitOptions {
    int n_starts = 4;
    int steps = 150;
    double step_size = 0.05;
    bool per_dimension_lengthscale = false;
};

struct HyperFitResult {
    KernelParams params;
    double log_marginal;
    bool degenerate_fallback = false;
};

// Multi-start first-order ascent of the log marginal likelihood over log
// parameters. The returned likelihood is at least that of every start point.
HyperFitResult fit_hyperparams(const Dataset& data, const HyperBounds& bounds,
                               const HyperFitOptions& opts, RngStream rng);

}  // namespace hes
