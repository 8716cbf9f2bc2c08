#include "hes/losses.hpp"

#include <algorithm>
#include <cmath>

#include "hes/descent.hpp"
#include "hes/errors.hpp"
#include "hes/posterior_graph.hpp"

namespace hes {

Vector Box::clamp(Vector x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
    return x;
}

bool Box::contains(const Vector& x, double tol) const {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
    return true;
}

double topk_diversity_loss(const Vector& f_values, const Matrix& points,
                           const TopKDiversityHyper& hyper) {
    double loss = 0.0;
    for (double f : f_values) loss -= f;
    if (hyper.distance_weight > 0.0) {
        for (std::size_t i = 0; i < points.rows(); ++i)
            for (std::size_t j = i + 1; j < points.rows(); ++j) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < points.cols(); ++c) {
                    const double d = points(i, c) - points(j, c);
                    d2 += d * d;
                }
                loss -= hyper.distance_weight * std::min(std::sqrt(d2), hyper.distance_cap);
            }
    }
    return loss;
}

double k_guesses_loss(const Vector& f_values, MaxMode mode, double temperature) {
    if (f_values.empty()) throw std::invalid_argument("k_guesses_loss: empty values");
    if (mode == MaxMode::Smooth) return -smooth_max(f_values, temperature);
    return -*std::max_element(f_values.begin(), f_values.end());
}

double mlse_loss(const Vector& f_values, const Matrix& logits, const Vector& thresholds) {
    if (logits.rows() != f_values.size() || logits.cols() != thresholds.size())
        throw DimensionMismatch("mlse_loss: shape mismatch");
    double loss = 0.0;
    for (std::size_t x = 0; x < f_values.size(); ++x)
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            const double z = logits(x, i);
            const double a = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                                      : std::exp(z) / (1.0 + std::exp(z));
            loss -= a * (f_values[x] - thresholds[i]);
        }
    return loss;
}

double sequence_loss(const Vector& f_values, const Vector& targets) {
    if (f_values.size() != targets.size())
        throw DimensionMismatch("sequence_loss: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i) {
        const double d = f_values[i] - targets[i];
        loss += d * d;
    }
    return loss;
}

double neg_value_loss(const Vector& f_values) {
    if (f_values.size() != 1) throw DimensionMismatch("neg_value_loss: expects one value");
    return -f_values[0];
}

namespace {

Matrix points_from_action(const Vector& action, std::size_t k, std::size_t dim) {
    if (action.size() != k * dim) throw DimensionMismatch("action length != k * dim");
    Matrix pts(k, dim);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < dim; ++j) pts(i, j) = action[i * dim + j];
    return pts;
}

Box replicate_box(const Box& design_box, std::size_t k) {
    Box b;
    for (std::size_t i = 0; i < k; ++i) {
        b.lo.insert(b.lo.end(), design_box.lo.begin(), design_box.lo.end());
        b.hi.insert(b.hi.end(), design_box.hi.begin(), design_box.hi.end());
    }
    return b;
}

// Point-set losses share the reshape anchor map and the peak-seeded init.
class PointSetLoss : public LossSpec {
public:
    PointSetLoss(std::size_t k, std::size_t dim) : k_(k), dim_(dim) {}

    std::size_t anchor_count() const override { return k_; }
    std::size_t action_dim() const override { return k_ * dim_; }

    Matrix anchor_points(const Vector& action) const override {
        return points_from_action(action, k_, dim_);
    }

    Var build_anchor_points(Tape& tape, Var action) const override {
        return tape.reshape(action, k_, dim_);
    }

    Box action_box(const Box& design_box) const override {
        return replicate_box(design_box, k_);
    }

protected:
    std::size_t k_;
    std::size_t dim_;
};

class TopKDiversityLoss final : public PointSetLoss {
public:
    TopKDiversityLoss(TopKDiversityHyper hyper, std::size_t dim)
        : PointSetLoss(hyper.k, dim), hyper_(hyper) {
        if (hyper.k < 1) throw std::invalid_argument("top-k loss: k must be >= 1");
        if (hyper.distance_weight < 0.0)
            throw std::invalid_argument("top-k loss: distance weight must be >= 0");
    }

    std::string name() const override { return "topk_diversity"; }

    Var build_mean_reduction(Tape& tape, Var values, Var action) const override {
        const double n = static_cast<double>(tape.value(values).cols());
        Var total = tape.scale(tape.sum(values), -1.0 / n);
        if (k_ > 1 && hyper_.distance_weight > 0.0) {
            Var pts = tape.reshape(action, k_, dim_);
            Var d2 = tape.clip(tape.pairwise_sqdist(pts, pts), 1e-18,
                               std::numeric_limits<double>::infinity());
            Var dist = tape.sqrt_(d2);
            Matrix mask(k_, k_);
            for (std::size_t i = 0; i < k_; ++i)
                for (std::size_t j = i + 1; j < k_; ++j) mask(i, j) = 1.0;
            Var masked = tape.mul(dist, tape.constant(std::move(mask)));
            Var capped = tape.clip(masked, -std::numeric_limits<double>::infinity(),
                                   hyper_.distance_cap);
            total = tape.add(total, tape.scale(tape.sum(capped), -hyper_.distance_weight));
        }
        return total;
    }

    double reduction(const Vector& values, const Vector& action) const override {
        return topk_diversity_loss(values, points_from_action(action, k_, dim_), hyper_);
    }

private:
    TopKDiversityHyper hyper_;
};

class KGuessesLoss final : public PointSetLoss {
public:
    KGuessesLoss(KGuessesHyper hyper, std::size_t dim)
        : PointSetLoss(hyper.k, dim), hyper_(hyper) {
        if (hyper.k < 1) throw std::invalid_argument("k-guesses loss: k must be >= 1");
        if (hyper.temperature <= 0.0)
            throw std::invalid_argument("k-guesses loss: temperature must be > 0");
    }

    std::string name() const override { return "k_guesses"; }

    Var build_mean_reduction(Tape& tape, Var values, Var /*action*/) const override {
        const double n = static_cast<double>(tape.value(values).cols());
        Var sm = tape.col_smooth_max(values, hyper_.temperature);
        return tape.scale(tape.sum(sm), -1.0 / n);
    }

    double reduction(const Vector& values, const Vector& /*action*/) const override {
        return k_guesses_loss(values, MaxMode::Smooth, hyper_.temperature);
    }

    double hard_reduction(const Vector& values, const Vector& /*action*/) const override {
        return k_guesses_loss(values, MaxMode::Hard);
    }

private:
    KGuessesHyper hyper_;
};

class SequenceLoss final : public PointSetLoss {
public:
    SequenceLoss(SequenceHyper hyper, std::size_t dim)
        : PointSetLoss(hyper.targets.size(), dim), hyper_(std::move(hyper)) {
        if (hyper_.targets.empty()) throw std::invalid_argument("sequence loss: no targets");
    }

    std::string name() const override { return "sequence"; }

    Var build_mean_reduction(Tape& tape, Var values, Var /*action*/) const override {
        const Matrix& v = tape.value(values);
        Matrix t(v.rows(), v.cols());
        for (std::size_t i = 0; i < v.rows(); ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) t(i, j) = hyper_.targets[i];
        Var diff = tape.sub(values, tape.constant(std::move(t)));
        return tape.scale(tape.sum(tape.square(diff)), 1.0 / v.cols());
    }

    double reduction(const Vector& values, const Vector& /*action*/) const override {
        return sequence_loss(values, hyper_.targets);
    }

private:
    SequenceHyper hyper_;
};

class NegValueLoss final : public PointSetLoss {
public:
    explicit NegValueLoss(std::size_t dim) : PointSetLoss(1, dim) {}

    std::string name() const override { return "neg_value"; }

    bool linear_in_values() const override { return true; }

    Var build_mean_reduction(Tape& tape, Var values, Var /*action*/) const override {
        const double n = static_cast<double>(tape.value(values).cols());
        return tape.scale(tape.sum(values), -1.0 / n);
    }

    double reduction(const Vector& values, const Vector& /*action*/) const override {
        return neg_value_loss(values);
    }
};

class MultiLevelSetLoss final : public LossSpec {
public:
    explicit MultiLevelSetLoss(MultiLevelSetHyper hyper) : hyper_(std::move(hyper)) {
        if (hyper_.grid.rows() == 0) throw std::invalid_argument("mlse loss: empty grid");
        for (std::size_t i = 1; i < hyper_.thresholds.size(); ++i)
            if (!(hyper_.thresholds[i - 1] < hyper_.thresholds[i]))
                throw std::invalid_argument("mlse loss: thresholds must be strictly increasing");
        if (hyper_.thresholds.empty()) throw std::invalid_argument("mlse loss: no thresholds");
    }

    std::string name() const override { return "mlse"; }
    std::size_t anchor_count() const override { return hyper_.grid.rows(); }
    std::size_t action_dim() const override {
        return hyper_.grid.rows() * hyper_.thresholds.size();
    }
    bool anchors_fixed() const override { return true; }
    bool linear_in_values() const override { return true; }

    const MultiLevelSetHyper& hyper() const { return hyper_; }

    Matrix anchor_points(const Vector& /*action*/) const override { return hyper_.grid; }

    Var build_anchor_points(Tape& tape, Var /*action*/) const override {
        return tape.constant(hyper_.grid);
    }

    Var build_mean_reduction(Tape& tape, Var values, Var action) const override {
        const Matrix& v = tape.value(values);
        const std::size_t j = hyper_.grid.rows();
        const std::size_t m = hyper_.thresholds.size();
        Var vavg = values;
        if (v.cols() > 1) {
            vavg = tape.scale(tape.matmul_(values, tape.constant(Matrix(v.cols(), 1, 1.0))),
                              1.0 / v.cols());
        }
        Var probs = tape.logistic(tape.reshape(action, j, m));
        Var spread = tape.matmul_(vavg, tape.constant(Matrix(1, m, 1.0)));  // J x m
        Matrix c(j, m);
        for (std::size_t r = 0; r < j; ++r)
            for (std::size_t i = 0; i < m; ++i) c(r, i) = hyper_.thresholds[i];
        Var margin = tape.sub(spread, tape.constant(std::move(c)));
        return tape.neg(tape.sum(tape.mul(probs, margin)));
    }

    double reduction(const Vector& values, const Vector& action) const override {
        Matrix logits(hyper_.grid.rows(), hyper_.thresholds.size());
        for (std::size_t i = 0; i < logits.size(); ++i) logits.data()[i] = action[i];
        return mlse_loss(values, logits, hyper_.thresholds);
    }

    double hard_reduction(const Vector& values, const Vector& action) const override {
        const std::size_t m = hyper_.thresholds.size();
        double loss = 0.0;
        for (std::size_t x = 0; x < values.size(); ++x)
            for (std::size_t i = 0; i < m; ++i)
                if (action[x * m + i] > 0.0)  // logistic(z) > 0.5
                    loss -= values[x] - hyper_.thresholds[i];
        return loss;
    }

    Box action_box(const Box& /*design_box*/) const override {
        Box b;
        b.lo.assign(action_dim(), -30.0);
        b.hi.assign(action_dim(), 30.0);
        return b;
    }

    Vector initial_action(const GpPosterior& gp, const Box& /*design_box*/, bool posterior_seeded,
                          const std::vector<Vector>& /*peaks*/, std::size_t /*salt*/,
                          RngStream& rng) const override {
        const std::size_t j = hyper_.grid.rows();
        const std::size_t m = hyper_.thresholds.size();
        Vector action(j * m);
        if (!posterior_seeded) {
            for (double& z : action) z = rng.normal();
            return action;
        }
        double span = 0.0;
        Vector means(j);
        for (std::size_t x = 0; x < j; ++x) {
            Vector pt(hyper_.grid.cols());
            for (std::size_t c = 0; c < pt.size(); ++c) pt[c] = hyper_.grid(x, c);
            means[x] = gp.predict(pt).mean;
            span = std::max(span, std::abs(means[x] - hyper_.thresholds[0]));
        }
        const double scale = 4.0 / std::max(span, 1e-6);
        for (std::size_t x = 0; x < j; ++x)
            for (std::size_t i = 0; i < m; ++i)
                action[x * m + i] = scale * (means[x] - hyper_.thresholds[i]);
        return action;
    }

private:
    MultiLevelSetHyper hyper_;
};

}  // namespace

std::unique_ptr<LossSpec> make_topk_diversity_loss(TopKDiversityHyper hyper, std::size_t dim) {
    return std::make_unique<TopKDiversityLoss>(hyper, dim);
}
std::unique_ptr<LossSpec> make_k_guesses_loss(KGuessesHyper hyper, std::size_t dim) {
    return std::make_unique<KGuessesLoss>(hyper, dim);
}
std::unique_ptr<LossSpec> make_mlse_loss(MultiLevelSetHyper hyper) {
    return std::make_unique<MultiLevelSetLoss>(std::move(hyper));
}
std::unique_ptr<LossSpec> make_sequence_loss(SequenceHyper hyper, std::size_t dim) {
    return std::make_unique<SequenceLoss>(std::move(hyper), dim);
}
std::unique_ptr<LossSpec> make_neg_value_loss(std::size_t dim) {
    return std::make_unique<NegValueLoss>(dim);
}

double true_loss(const std::function<double(const Vector&)>& f_true, const LossSpec& spec,
                 const Vector& action) {
    const Matrix anchors = spec.anchor_points(action);
    Vector values(anchors.rows());
    for (std::size_t i = 0; i < anchors.rows(); ++i) {
        Vector x(anchors.cols());
        for (std::size_t j = 0; j < anchors.cols(); ++j) x[j] = anchors(i, j);
        values[i] = f_true(x);
    }
    return spec.hard_reduction(values, action);
}

std::vector<Vector> posterior_mean_peaks(const GpPosterior& gp, const Box& box,
                                         std::size_t candidate_count) {
    std::vector<Vector> candidates = halton_points(candidate_count, box.lo, box.hi);
    std::vector<std::pair<double, std::size_t>> scored(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i)
        scored[i] = {gp.predict(candidates[i]).mean, i};
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    // Greedy separation so the list approximates distinct local maxima rather
    // than one crowded peak.
    double sep2 = 0.0;
    for (std::size_t c = 0; c < box.dim(); ++c) sep2 += box.width(c) * box.width(c);
    sep2 *= 0.05 * 0.05;
    std::vector<Vector> peaks;
    for (const auto& [score, idx] : scored) {
        bool far = true;
        for (const Vector& p : peaks) {
            double d2 = 0.0;
            for (std::size_t c = 0; c < p.size(); ++c) {
                const double d = p[c] - candidates[idx][c];
                d2 += d * d;
            }
            if (d2 < sep2) {
                far = false;
                break;
            }
        }
        if (far) peaks.push_back(candidates[idx]);
        if (peaks.size() >= 64) break;
    }
    return peaks;
}

Vector LossSpec::initial_action(const GpPosterior& /*gp*/, const Box& design_box,
                                bool posterior_seeded, const std::vector<Vector>& peaks,
                                std::size_t salt, RngStream& rng) const {
    const std::size_t k = anchor_count();
    const std::size_t d = design_box.dim();
    Vector action(k * d);
    for (std::size_t i = 0; i < k; ++i) {
        Vector point(d);
        if (posterior_seeded && !peaks.empty()) {
            const Vector& p = peaks[(salt + i) % peaks.size()];
            for (std::size_t c = 0; c < d; ++c)
                point[c] = p[c] + 0.01 * design_box.width(c) * rng.normal();
        } else {
            for (std::size_t c = 0; c < d; ++c)
                point[c] = rng.uniform(design_box.lo[c], design_box.hi[c]);
        }
        for (std::size_t c = 0; c < d; ++c) action[i * d + c] = point[c];
    }
    return action;
}

BayesActionResult bayes_action(const GpPosterior& gp, const LossSpec& spec, const Box& design_box,
                               const SolverConfig& solver, RngStream rng) {
    const std::size_t k = spec.anchor_count();
    const std::size_t n_samples = std::max(1, solver.n_samples);

    RngStream bank_rng = rng.fork(1);
    Matrix eps = antithetic_normal_columns(bank_rng, k, n_samples);

    const Box abox = spec.action_box(design_box);
    const std::vector<Vector> peaks = posterior_mean_peaks(gp, design_box, solver.candidate_count);

    // Fixed-anchor linear losses collapse the sample average before the
    // reduction; the joint factor is built once per call.
    std::optional<JointGaussian> fixed_joint;
    Vector vbar;
    if (spec.anchors_fixed() && spec.linear_in_values()) {
        fixed_joint = gp.joint_posterior(spec.anchor_points(Vector(spec.action_dim(), 0.0)));
        Vector eps_mean(k, 0.0);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t s = 0; s < n_samples; ++s) eps_mean[i] += eps(i, s);
            eps_mean[i] /= n_samples;
        }
        vbar = sample_values(*fixed_joint, eps_mean);
    }

    auto evaluate = [&](const Vector& action, Vector* grad_out) -> double {
        Tape tape;
        Var a = tape.input(Matrix::col_vector(action));
        Var objective;
        if (fixed_joint) {
            Var values = tape.constant(Matrix::col_vector(vbar));
            objective = spec.build_mean_reduction(tape, values, a);
        } else {
            GpTapeConstants c = gp_tape_constants(tape, gp);
            Var anchors = spec.build_anchor_points(tape, a);
            JointNodes joint = joint_posterior_nodes(tape, c, anchors);
            Var u = tape.cholesky_(joint.cov, solver.jitter);
            Var spread = tape.matmul_(joint.mean, tape.constant(Matrix(1, n_samples, 1.0)));
            Var values = tape.add(spread, tape.matmul_(u, tape.constant(eps)));
            objective = spec.build_mean_reduction(tape, values, a);
        }
        if (grad_out) {
            tape.backward(objective);
            *grad_out = tape.grad(a).to_vector();
        }
        return tape.value(objective).scalar();
    };

    auto value_fn = [&](const Vector& a) { return evaluate(a, nullptr); };
    auto value_grad_fn = [&](const Vector& a, Vector& g) { return evaluate(a, &g); };

    BayesActionResult best;
    best.expected_loss = std::numeric_limits<double>::infinity();
    bool any_improved = false;
    const int restarts = std::max(1, solver.restarts);
    for (int r = 0; r < restarts; ++r) {
        RngStream rrng = rng.fork(100 + r);
        const bool seeded = r < (restarts + 1) / 2;
        Vector init = spec.initial_action(gp, design_box, seeded, peaks, r, rrng);
        DescentResult res =
            projected_descent(value_fn, value_grad_fn, std::move(init), abox, solver.steps,
                              solver.step_size);
        any_improved = any_improved || res.improved;
        if (res.value < best.expected_loss) {
            best.expected_loss = res.value;
            best.action = res.point;
        }
    }
    best.no_improvement = !any_improved;

    // Per-sample losses at the chosen action give the Monte Carlo stderr.
    Vector per_sample(n_samples);
    {
        Vector values(k);
        std::optional<JointGaussian> joint = fixed_joint;
        if (!joint) joint = gp.joint_posterior(spec.anchor_points(best.action));
        Vector col(k);
        for (std::size_t s = 0; s < n_samples; ++s) {
            for (std::size_t i = 0; i < k; ++i) col[i] = eps(i, s);
            values = sample_values(*joint, col);
            per_sample[s] = spec.reduction(values, best.action);
        }
    }
    double mean = 0.0;
    for (double v : per_sample) mean += v;
    mean /= n_samples;
    double var = 0.0;
    for (double v : per_sample) var += (v - mean) * (v - mean);
    var = n_samples > 1 ? var / (n_samples - 1) : 0.0;
    best.stderr = std::sqrt(var / n_samples);
    return best;
}

BayesActionResult bayes_action_discrete(const GpPosterior& gp, const Matrix& candidates) {
    if (candidates.rows() == 0)
        throw std::invalid_argument("bayes_action_discrete: empty candidate set");
    BayesActionResult best;
    best.expected_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.rows(); ++i) {
        Vector x(candidates.cols());
        for (std::size_t c = 0; c < candidates.cols(); ++c) x[c] = candidates(i, c);
        const double loss = -gp.predict(x).mean;
        if (loss < best.expected_loss) {
            best.expected_loss = loss;
            best.action = x;
        }
    }
    best.stderr = 0.0;
    best.no_improvement = false;
    return best;
}

}  // namespace hes
