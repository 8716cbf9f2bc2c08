#include "hes/gp.hpp"

#include <algorithm>
#include <cmath>

#include "hes/errors.hpp"

namespace hes {

KernelParams KernelParams::isotropic(std::size_t dim, double lengthscale, double signal_variance,
                                     double noise_variance) {
    KernelParams p;
    p.lengthscales.assign(dim, lengthscale);
    p.signal_variance = signal_variance;
    p.noise_variance = noise_variance;
    return p;
}

void KernelParams::validate() const {
    for (double l : lengthscales)
        if (!(l > 0.0) || !std::isfinite(l))
            throw std::invalid_argument("kernel lengthscales must be positive and finite");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
        throw std::invalid_argument("signal variance must be positive and finite");
    if (noise_variance < 0.0 || !std::isfinite(noise_variance))
        throw std::invalid_argument("noise variance must be non-negative and finite");
}

Dataset Dataset::augmented(const Vector& x, double y) const {
    Dataset out;
    const std::size_t n = size();
    const std::size_t d = n == 0 ? x.size() : dim();
    if (x.size() != d) throw DimensionMismatch("augmented: input dimension mismatch");
    out.inputs = Matrix(n + 1, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out.inputs(i, j) = inputs(i, j);
    for (std::size_t j = 0; j < d; ++j) out.inputs(n, j) = x[j];
    out.outputs = outputs;
    out.outputs.push_back(y);
    return out;
}

double kernel(const Vector& x, const Vector& y, const KernelParams& params) {
    if (x.size() != y.size() || x.size() != params.lengthscales.size())
        throw DimensionMismatch("kernel: point dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = (x[i] - y[i]) / params.lengthscales[i];
        s += d * d;
    }
    return params.signal_variance * std::exp(-0.5 * s);
}

Matrix kernel_cross(const Matrix& a, const Matrix& b, const KernelParams& params) {
    if (a.cols() != b.cols() || a.cols() != params.lengthscales.size())
        throw DimensionMismatch("kernel_cross: point dimension mismatch");
    Matrix k(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < a.cols(); ++c) {
                const double d = (a(i, c) - b(j, c)) / params.lengthscales[c];
                s += d * d;
            }
            k(i, j) = params.signal_variance * std::exp(-0.5 * s);
        }
    return k;
}

Vector sample_values(const JointGaussian& j, const Vector& eps) {
    if (eps.size() != j.dim()) throw DimensionMismatch("sample_values: eps length mismatch");
    Vector out = j.mean;
    for (std::size_t i = 0; i < j.dim(); ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += j.scale(i, k) * eps[k];
        out[i] += s;
    }
    return out;
}

GpPosterior::GpPosterior(Dataset data, KernelParams params)
    : data_(std::move(data)), params_(std::move(params)) {
    if (data_.size() > 0) {
        double s = 0.0;
        for (double y : data_.outputs) s += y;
        prior_mean_ = s / data_.size();
    }
    build();
}

GpPosterior::GpPosterior(Dataset data, KernelParams params, double prior_mean)
    : data_(std::move(data)), params_(std::move(params)), prior_mean_(prior_mean) {
    build();
}

void GpPosterior::build() {
    params_.validate();
    const std::size_t n = data_.size();
    if (n == 0) return;
    if (params_.lengthscales.size() != data_.dim())
        throw DimensionMismatch("GpPosterior: lengthscale count != input dimension");
    Matrix k = kernel_cross(data_.inputs, data_.inputs, params_);
    for (std::size_t i = 0; i < n; ++i) k(i, i) += params_.noise_variance;
    chol_ = cholesky(k, kDefaultJitter);
    Vector centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = data_.outputs[i] - prior_mean_;
    alpha_ = tri_solve(chol_, tri_solve(chol_, centered, TriSide::Lower), TriSide::Upper);
}

Vector GpPosterior::kernel_vector(const Vector& x) const {
    const std::size_t n = data_.size();
    Vector k(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < data_.dim(); ++c) {
            const double d = (data_.inputs(i, c) - x[c]) / params_.lengthscales[c];
            s += d * d;
        }
        k[i] = params_.signal_variance * std::exp(-0.5 * s);
    }
    return k;
}

GpPosterior::Prediction GpPosterior::predict(const Vector& x) const {
    if (data_.size() == 0) return {prior_mean_, params_.signal_variance};
    const Vector k = kernel_vector(x);
    const Vector s = tri_solve(chol_, k, TriSide::Lower);
    const double mean = prior_mean_ + dot(k, alpha_);
    const double var = std::max(0.0, params_.signal_variance - dot(s, s));
    return {mean, var};
}

JointGaussian GpPosterior::joint_posterior(const Matrix& anchors) const {
    if (anchors.rows() == 0) throw DimensionMismatch("joint_posterior: no anchor points");
    if (anchors.cols() != params_.lengthscales.size())
        throw DimensionMismatch("joint_posterior: anchor dimension mismatch");
    Matrix cov = kernel_cross(anchors, anchors, params_);
    Vector mean(anchors.rows(), prior_mean_);
    if (data_.size() > 0) {
        const Matrix cross = kernel_cross(anchors, data_.inputs, params_);
        const Matrix s = tri_solve_matrix(chol_.lower, cross.transposed(), TriSide::Lower);
        for (std::size_t i = 0; i < anchors.rows(); ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < data_.size(); ++j) m += cross(i, j) * alpha_[j];
            mean[i] += m;
        }
        for (std::size_t i = 0; i < anchors.rows(); ++i)
            for (std::size_t j = 0; j < anchors.rows(); ++j) {
                double c = 0.0;
                for (std::size_t r = 0; r < data_.size(); ++r) c += s(r, i) * s(r, j);
                cov(i, j) -= c;
            }
    }
    CholFactor f = cholesky(cov, kDefaultJitter);
    return {std::move(mean), std::move(f.lower)};
}

double GpPosterior::fantasy_observation(const Vector& x, double lambda) const {
    const Prediction p = predict(x);
    return p.mean + std::sqrt(p.variance + params_.noise_variance) * lambda;
}

GpPosterior GpPosterior::fantasize(const Vector& x, double ybar) const {
    if (!std::isfinite(ybar)) throw std::invalid_argument("fantasize: non-finite observation");
    return GpPosterior(data_.augmented(x, ybar), params_, prior_mean_);
}

double log_marginal_likelihood(const Dataset& data, const KernelParams& params,
                               double prior_mean) {
    const std::size_t n = data.size();
    Matrix k = kernel_cross(data.inputs, data.inputs, params);
    for (std::size_t i = 0; i < n; ++i) k(i, i) += params.noise_variance;
    const CholFactor f = cholesky(k, kDefaultJitter);
    Vector centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = data.outputs[i] - prior_mean;
    const Vector alpha =
        tri_solve(f, tri_solve(f, centered, TriSide::Lower), TriSide::Upper);
    double logdet = 0.0;
    for (std::size_t i = 0; i < n; ++i) logdet += std::log(f.lower(i, i));
    return -0.5 * dot(centered, alpha) - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

HyperBounds HyperBounds::from_data(const Dataset& data) {
    double span = 0.0;
    for (std::size_t c = 0; c < data.dim(); ++c) {
        double lo = data.inputs(0, c), hi = lo;
        for (std::size_t i = 1; i < data.size(); ++i) {
            lo = std::min(lo, data.inputs(i, c));
            hi = std::max(hi, data.inputs(i, c));
        }
        span = std::max(span, hi - lo);
    }
    if (span <= 0.0) span = 1.0;
    double ymin = data.outputs[0], ymax = ymin;
    for (double y : data.outputs) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    double yspan = std::max(ymax - ymin, 1e-3);
    HyperBounds b;
    b.log_lengthscale_lo = std::log(0.01 * span);
    b.log_lengthscale_hi = std::log(10.0 * span);
    b.log_signal_lo = std::log(1e-4 * yspan * yspan);
    b.log_signal_hi = std::log(100.0 * yspan * yspan);
    b.log_noise_lo = std::log(1e-8 * yspan * yspan);
    b.log_noise_hi = std::log(1.0 * yspan * yspan);
    return b;
}

namespace {

struct LogParams {
    Vector log_ls;  // one entry when isotropic
    double log_sv;
    double log_nv;

    KernelParams to_kernel(std::size_t dim) const {
        KernelParams p;
        if (log_ls.size() == 1) {
            p.lengthscales.assign(dim, std::exp(log_ls[0]));
        } else {
            p.lengthscales.resize(log_ls.size());
            for (std::size_t i = 0; i < log_ls.size(); ++i)
                p.lengthscales[i] = std::exp(log_ls[i]);
        }
        p.signal_variance = std::exp(log_sv);
        p.noise_variance = std::exp(log_nv);
        return p;
    }
};

// d LML / d theta = 0.5 tr((alpha alpha^T - Kinv) dK/dtheta) over log params.
Vector lml_gradient(const Dataset& data, const LogParams& lp, double prior_mean) {
    const std::size_t n = data.size();
    const std::size_t d = data.dim();
    const KernelParams params = lp.to_kernel(d);
    Matrix kmat = kernel_cross(data.inputs, data.inputs, params);
    Matrix knoise = kmat;
    for (std::size_t i = 0; i < n; ++i) knoise(i, i) += params.noise_variance;
    const CholFactor f = cholesky(knoise, kDefaultJitter);
    Vector centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = data.outputs[i] - prior_mean;
    const Vector alpha =
        tri_solve(f, tri_solve(f, centered, TriSide::Lower), TriSide::Upper);

    // G = alpha alpha^T - Kinv
    Matrix kinv = tri_solve_matrix(
        f.lower, tri_solve_matrix(f.lower, Matrix::identity(n), TriSide::Lower), TriSide::Upper);
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = alpha[i] * alpha[j] - kinv(i, j);

    const bool iso = lp.log_ls.size() == 1;
    Vector out(lp.log_ls.size() + 2, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double gk = g(i, j) * kmat(i, j);
            for (std::size_t c = 0; c < d; ++c) {
                const double r = (data.inputs(i, c) - data.inputs(j, c)) / params.lengthscales[c];
                const double contrib = 0.5 * gk * r * r;
                out[iso ? 0 : c] += contrib;
            }
            if (i == j) {
                out[lp.log_ls.size()] += 0.5 * gk;  // d/d log signal: dK = K
                out[lp.log_ls.size() + 1] += 0.5 * g(i, i) * params.noise_variance;
            } else {
                out[lp.log_ls.size()] += 0.5 * gk;
            }
        }
    return out;
}

}  // namespace

HyperFitResult fit_hyperparams(const Dataset& data, const HyperBounds& bounds,
                               const HyperFitOptions& opts, RngStream rng) {
    if (data.size() < 2) throw std::invalid_argument("fit_hyperparams: need at least 2 points");
    double ymin = data.outputs[0], ymax = ymin, ysum = 0.0;
    for (double y : data.outputs) {
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        ysum += y;
    }
    const double prior_mean = ysum / data.size();
    const std::size_t nls = opts.per_dimension_lengthscale ? data.dim() : 1;

    HyperFitResult result;
    if (ymax - ymin < 1e-12) {
        LogParams def;
        def.log_ls.assign(nls, 0.5 * (bounds.log_lengthscale_lo + bounds.log_lengthscale_hi));
        def.log_sv = 0.0;
        def.log_nv = std::log(1e-4);
        result.params = def.to_kernel(data.dim());
        result.log_marginal = log_marginal_likelihood(data, result.params, prior_mean);
        result.degenerate_fallback = true;
        return result;
    }

    const double yvar = [&] {
        double s = 0.0;
        for (double y : data.outputs) s += (y - prior_mean) * (y - prior_mean);
        return std::max(s / data.size(), 1e-12);
    }();

    auto clampv = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };
    auto project = [&](LogParams& lp) {
        for (double& v : lp.log_ls)
            v = clampv(v, bounds.log_lengthscale_lo, bounds.log_lengthscale_hi);
        lp.log_sv = clampv(lp.log_sv, bounds.log_signal_lo, bounds.log_signal_hi);
        lp.log_nv = clampv(lp.log_nv, bounds.log_noise_lo, bounds.log_noise_hi);
    };
    auto objective = [&](const LogParams& lp) {
        return log_marginal_likelihood(data, lp.to_kernel(data.dim()), prior_mean);
    };

    std::vector<LogParams> starts;
    {
        LogParams def;
        def.log_ls.assign(nls, std::log(0.3) + 0.5 * (bounds.log_lengthscale_lo +
                                                      bounds.log_lengthscale_hi));
        def.log_sv = std::log(yvar);
        def.log_nv = std::log(0.01 * yvar);
        project(def);
        starts.push_back(def);
    }
    for (int s = 1; s < opts.n_starts; ++s) {
        LogParams lp;
        lp.log_ls.resize(nls);
        for (double& v : lp.log_ls)
            v = rng.uniform(bounds.log_lengthscale_lo, bounds.log_lengthscale_hi);
        lp.log_sv = rng.uniform(bounds.log_signal_lo, bounds.log_signal_hi);
        lp.log_nv = rng.uniform(bounds.log_noise_lo, bounds.log_noise_hi);
        starts.push_back(lp);
    }

    double best_val = -std::numeric_limits<double>::infinity();
    LogParams best = starts.front();
    for (const LogParams& start : starts) {
        LogParams lp = start;
        const std::size_t np = nls + 2;
        Vector m(np, 0.0), v(np, 0.0);
        double cur = objective(lp);
        if (cur > best_val) {
            best_val = cur;
            best = lp;
        }
        for (int step = 0; step < opts.steps; ++step) {
            Vector gr = lml_gradient(data, lp, prior_mean);
            for (std::size_t k = 0; k < np; ++k) {
                m[k] = 0.9 * m[k] + 0.1 * gr[k];
                v[k] = 0.999 * v[k] + 0.001 * gr[k] * gr[k];
                const double mh = m[k] / (1.0 - std::pow(0.9, step + 1));
                const double vh = v[k] / (1.0 - std::pow(0.999, step + 1));
                const double delta = opts.step_size * mh / (std::sqrt(vh) + 1e-8);
                if (k < nls)
                    lp.log_ls[k] += delta;
                else if (k == nls)
                    lp.log_sv += delta;
                else
                    lp.log_nv += delta;
            }
            project(lp);
            cur = objective(lp);
            if (cur > best_val) {
                best_val = cur;
                best = lp;
            }
        }
    }

    result.params = best.to_kernel(data.dim());
    result.log_marginal = best_val;
    result.degenerate_fallback = false;
    return result;
}

}  // namespace hes
