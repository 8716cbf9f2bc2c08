#include "hes/tape.hpp"

#include <cmath>
#include <unordered_map>

#include "hes/errors.hpp"

namespace hes {

namespace {

bool all_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(m.data()[i])) return false;
    return true;
}

// Elementwise binary with 1x1 broadcast on either side.
template <typename F>
Matrix elementwise(const Matrix& a, const Matrix& b, F f) {
    if (a.is_scalar() && !b.is_scalar()) {
        Matrix c(b.rows(), b.cols());
        for (std::size_t i = 0; i < b.size(); ++i) c.data()[i] = f(a.scalar(), b.data()[i]);
        return c;
    }
    if (b.is_scalar() && !a.is_scalar()) {
        Matrix c(a.rows(), a.cols());
        for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = f(a.data()[i], b.scalar());
        return c;
    }
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionMismatch("elementwise: shape mismatch");
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = f(a.data()[i], b.data()[i]);
    return c;
}

template <typename F>
Matrix map(const Matrix& a, F f) {
    Matrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) c.data()[i] = f(a.data()[i]);
    return c;
}

Matrix lower_mask(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j <= i && j < m.cols(); ++j) out(i, j) = m(i, j);
    return out;
}

}  // namespace

const char* op_name(OpId op) {
    switch (op) {
        case OpId::Input: return "input";
        case OpId::Constant: return "constant";
        case OpId::Add: return "add";
        case OpId::Sub: return "sub";
        case OpId::Mul: return "mul";
        case OpId::Div: return "div";
        case OpId::Scale: return "scale";
        case OpId::Neg: return "neg";
        case OpId::Exp: return "exp";
        case OpId::Log: return "log";
        case OpId::Square: return "square";
        case OpId::Sqrt: return "sqrt";
        case OpId::Logistic: return "logistic";
        case OpId::MatMul: return "matmul";
        case OpId::Transpose: return "transpose";
        case OpId::Reshape: return "reshape";
        case OpId::Dot: return "dot";
        case OpId::Sum: return "sum";
        case OpId::Cumsum: return "cumsum";
        case OpId::PairwiseSqdist: return "pairwise_sqdist";
        case OpId::Cholesky: return "cholesky";
        case OpId::TriSolveLower: return "trisolve_lower";
        case OpId::TriSolveUpper: return "trisolve_upper";
        case OpId::ColSmoothMax: return "col_smooth_max";
        case OpId::ColHardMax: return "col_hard_max";
        case OpId::Clip: return "clip";
    }
    return "?";
}

Var Tape::push(Matrix value, OpId op, int p0, int p1, double a0, double a1) {
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.p0 = p0;
    n.p1 = p1;
    n.a0 = a0;
    n.a1 = a1;
    n.requires_grad = (p0 >= 0 && nodes_[p0].requires_grad) || (p1 >= 0 && nodes_[p1].requires_grad);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value) {
    if (!all_finite(value)) throw std::invalid_argument("tape input contains non-finite values");
    Var v = push(std::move(value), OpId::Input);
    nodes_[v.idx].requires_grad = true;
    return v;
}

Var Tape::constant(Matrix value) {
    if (!all_finite(value)) throw std::invalid_argument("tape constant contains non-finite values");
    return push(std::move(value), OpId::Constant);
}

Var Tape::constant_scalar(double value) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
}

const Matrix& Tape::grad(Var v) const {
    const Node& n = nodes_[v.idx];
    if (n.grad.empty()) {
        static thread_local Matrix zero;
        zero = Matrix(n.value.rows(), n.value.cols());
        return zero;
    }
    return n.grad;
}

Matrix& Tape::grad_ref(int idx) {
    Node& n = nodes_[idx];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::accumulate(int idx, const Matrix& contribution) {
    Node& n = nodes_[idx];
    if (!n.requires_grad) return;
    Matrix& g = grad_ref(idx);
    if (n.value.is_scalar() && !contribution.is_scalar()) {
        double s = 0.0;
        for (std::size_t i = 0; i < contribution.size(); ++i) s += contribution.data()[i];
        g(0, 0) += s;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += contribution.data()[i];
}

Var Tape::add(Var a, Var b) {
    return push(elementwise(value(a), value(b), [](double x, double y) { return x + y; }),
                OpId::Add, a.idx, b.idx);
}

Var Tape::sub(Var a, Var b) {
    return push(elementwise(value(a), value(b), [](double x, double y) { return x - y; }),
                OpId::Sub, a.idx, b.idx);
}

Var Tape::mul(Var a, Var b) {
    return push(elementwise(value(a), value(b), [](double x, double y) { return x * y; }),
                OpId::Mul, a.idx, b.idx);
}

Var Tape::div(Var a, Var b) {
    return push(elementwise(value(a), value(b), [](double x, double y) { return x / y; }),
                OpId::Div, a.idx, b.idx);
}

Var Tape::scale(Var a, double mult, double shift) {
    return push(map(value(a), [=](double x) { return mult * x + shift; }),
                OpId::Scale, a.idx, -1, mult, shift);
}

Var Tape::neg(Var a) { return push(map(value(a), [](double x) { return -x; }), OpId::Neg, a.idx); }

Var Tape::exp_(Var a) {
    return push(map(value(a), [](double x) { return std::exp(x); }), OpId::Exp, a.idx);
}

Var Tape::log_(Var a) {
    return push(map(value(a), [](double x) { return std::log(x); }), OpId::Log, a.idx);
}

Var Tape::square(Var a) {
    return push(map(value(a), [](double x) { return x * x; }), OpId::Square, a.idx);
}

Var Tape::sqrt_(Var a) {
    return push(map(value(a), [](double x) { return std::sqrt(x); }), OpId::Sqrt, a.idx);
}

Var Tape::logistic(Var a) {
    return push(map(value(a),
                    [](double x) {
                        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                        const double e = std::exp(x);
                        return e / (1.0 + e);
                    }),
                OpId::Logistic, a.idx);
}

Var Tape::matmul_(Var a, Var b) {
    return push(matmul(value(a), value(b)), OpId::MatMul, a.idx, b.idx);
}

Var Tape::transpose(Var a) { return push(value(a).transposed(), OpId::Transpose, a.idx); }

Var Tape::reshape(Var a, std::size_t rows, std::size_t cols) {
    const Matrix& v = value(a);
    if (rows * cols != v.size()) throw DimensionMismatch("reshape: element count changes");
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < v.size(); ++i) out.data()[i] = v.data()[i];
    return push(std::move(out), OpId::Reshape, a.idx);
}

Var Tape::dot_(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.size() != vb.size()) throw DimensionMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) s += va.data()[i] * vb.data()[i];
    Matrix out(1, 1);
    out(0, 0) = s;
    return push(std::move(out), OpId::Dot, a.idx, b.idx);
}

Var Tape::sum(Var a) {
    const Matrix& v = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v.data()[i];
    Matrix out(1, 1);
    out(0, 0) = s;
    return push(std::move(out), OpId::Sum, a.idx);
}

Var Tape::cumsum(Var a) {
    const Matrix& v = value(a);
    if (v.cols() != 1) throw DimensionMismatch("cumsum: expects a column vector");
    Matrix out(v.rows(), 1);
    double s = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) {
        s += v(i, 0);
        out(i, 0) = s;
    }
    return push(std::move(out), OpId::Cumsum, a.idx);
}

Var Tape::pairwise_sqdist(Var a, Var b) {
    const Matrix& va = value(a);
    const Matrix& vb = value(b);
    if (va.cols() != vb.cols()) throw DimensionMismatch("pairwise_sqdist: point dims differ");
    Matrix out(va.rows(), vb.rows());
    for (std::size_t i = 0; i < va.rows(); ++i)
        for (std::size_t j = 0; j < vb.rows(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < va.cols(); ++k) {
                const double d = va(i, k) - vb(j, k);
                s += d * d;
            }
            out(i, j) = s;
        }
    return push(std::move(out), OpId::PairwiseSqdist, a.idx, b.idx);
}

Var Tape::cholesky_(Var a, double base_jitter) {
    const Matrix& v = value(a);
    if (v.rows() != v.cols()) throw DimensionMismatch("cholesky: input not square");
    Matrix sym(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) sym(i, j) = 0.5 * (v(i, j) + v(j, i));
    CholFactor f = cholesky(sym, base_jitter);
    return push(std::move(f.lower), OpId::Cholesky, a.idx, -1, f.jitter_applied);
}

Var Tape::trisolve_lower(Var lower, Var rhs) {
    return push(tri_solve_matrix(value(lower), value(rhs), TriSide::Lower),
                OpId::TriSolveLower, lower.idx, rhs.idx);
}

Var Tape::trisolve_upper(Var lower, Var rhs) {
    return push(tri_solve_matrix(value(lower), value(rhs), TriSide::Upper),
                OpId::TriSolveUpper, lower.idx, rhs.idx);
}

Var Tape::col_smooth_max(Var a, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("col_smooth_max: temperature must be > 0");
    const Matrix& v = value(a);
    Matrix out(1, v.cols());
    for (std::size_t j = 0; j < v.cols(); ++j) {
        double m = v(0, j);
        for (std::size_t i = 1; i < v.rows(); ++i) m = std::max(m, v(i, j));
        double s = 0.0;
        for (std::size_t i = 0; i < v.rows(); ++i) s += std::exp((v(i, j) - m) / temperature);
        out(0, j) = m + temperature * std::log(s);
    }
    return push(std::move(out), OpId::ColSmoothMax, a.idx, -1, temperature);
}

Var Tape::col_hard_max(Var a) {
    const Matrix& v = value(a);
    Matrix out(1, v.cols());
    for (std::size_t j = 0; j < v.cols(); ++j) {
        double m = v(0, j);
        for (std::size_t i = 1; i < v.rows(); ++i) m = std::max(m, v(i, j));
        out(0, j) = m;
    }
    return push(std::move(out), OpId::ColHardMax, a.idx);
}

Var Tape::clip(Var a, double lo, double hi) {
    return push(map(value(a), [=](double x) { return std::min(std::max(x, lo), hi); }),
                OpId::Clip, a.idx, -1, lo, hi);
}

// ---------------------------------------------------------------------------
// Adjoint rules

struct AdjointRules {
    using Fn = void (*)(Tape&, int);

    static const Matrix& out_grad(Tape& t, int idx) { return t.nodes_[idx].grad; }
    static const Matrix& val(Tape& t, int idx) { return t.nodes_[idx].value; }
    static const Matrix& pval(Tape& t, int idx, int which) {
        return t.nodes_[which == 0 ? t.nodes_[idx].p0 : t.nodes_[idx].p1].value;
    }
    static bool needs(Tape& t, int parent) { return parent >= 0 && t.nodes_[parent].requires_grad; }

    static void leaf(Tape&, int) {}

    static void add(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, n.grad);
        if (needs(t, n.p1)) t.accumulate(n.p1, n.grad);
    }

    static void sub(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, n.grad);
        if (needs(t, n.p1)) t.accumulate(n.p1, map(n.grad, [](double g) { return -g; }));
    }

    static void mul(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, pval(t, i, 1), [](double g, double b) { return g * b; }));
        if (needs(t, n.p1))
            t.accumulate(n.p1, elementwise(n.grad, pval(t, i, 0), [](double g, double a) { return g * a; }));
    }

    static void div(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        const Matrix& b = pval(t, i, 1);
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, b, [](double g, double y) { return g / y; }));
        if (needs(t, n.p1)) {
            Matrix gb = elementwise(n.grad, n.value, [](double g, double c) { return g * c; });
            t.accumulate(n.p1, elementwise(gb, b, [](double g, double y) { return -g / y; }));
        }
    }

    static void scale(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, map(n.grad, [&](double g) { return n.a0 * g; }));
    }

    static void neg(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, map(n.grad, [](double g) { return -g; }));
    }

    static void exp_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, n.value, [](double g, double c) { return g * c; }));
    }

    static void log_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, pval(t, i, 0), [](double g, double a) { return g / a; }));
    }

    static void square(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, pval(t, i, 0), [](double g, double a) { return 2.0 * g * a; }));
    }

    static void sqrt_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, n.value, [](double g, double c) { return 0.5 * g / c; }));
    }

    static void logistic(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0))
            t.accumulate(n.p0, elementwise(n.grad, n.value,
                                           [](double g, double c) { return g * c * (1.0 - c); }));
    }

    static void matmul_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, matmul(n.grad, pval(t, i, 1).transposed()));
        if (needs(t, n.p1)) t.accumulate(n.p1, matmul(pval(t, i, 0).transposed(), n.grad));
    }

    static void transpose(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (needs(t, n.p0)) t.accumulate(n.p0, n.grad.transposed());
    }

    static void reshape(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& p = pval(t, i, 0);
        Matrix g(p.rows(), p.cols());
        for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] = n.grad.data()[k];
        t.accumulate(n.p0, g);
    }

    static void dot_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        const double g = n.grad(0, 0);
        if (needs(t, n.p0)) t.accumulate(n.p0, map(pval(t, i, 1), [=](double b) { return g * b; }));
        if (needs(t, n.p1)) t.accumulate(n.p1, map(pval(t, i, 0), [=](double a) { return g * a; }));
    }

    static void sum(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& p = pval(t, i, 0);
        t.accumulate(n.p0, Matrix(p.rows(), p.cols(), n.grad(0, 0)));
    }

    static void cumsum(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        Matrix g(n.grad.rows(), 1);
        double s = 0.0;
        for (std::size_t k = n.grad.rows(); k-- > 0;) {
            s += n.grad(k, 0);
            g(k, 0) = s;
        }
        t.accumulate(n.p0, g);
    }

    static void pairwise_sqdist(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        const Matrix& a = pval(t, i, 0);
        const Matrix& b = pval(t, i, 1);
        if (needs(t, n.p0)) {
            Matrix ga(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < b.rows(); ++c) {
                    const double g2 = 2.0 * n.grad(r, c);
                    if (g2 == 0.0) continue;
                    for (std::size_t k = 0; k < a.cols(); ++k)
                        ga(r, k) += g2 * (a(r, k) - b(c, k));
                }
            t.accumulate(n.p0, ga);
        }
        if (needs(t, n.p1)) {
            Matrix gb(b.rows(), b.cols());
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < b.rows(); ++c) {
                    const double g2 = 2.0 * n.grad(r, c);
                    if (g2 == 0.0) continue;
                    for (std::size_t k = 0; k < b.cols(); ++k)
                        gb(c, k) += g2 * (b(c, k) - a(r, k));
                }
            t.accumulate(n.p1, gb);
        }
    }

    // Reverse-mode rule for L = chol(sym(A) + jitter I). With P = phi(L^T Lbar)
    // (phi keeps the lower triangle and halves the diagonal), the adjoint of
    // the symmetrized input is sym(L^-T P L^-1), which is also the adjoint of
    // A itself because the forward pass symmetrizes.
    static void cholesky_(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& l = n.value;
        const std::size_t k = l.rows();
        Matrix p = matmul(l.transposed(), lower_mask(n.grad));
        for (std::size_t r = 0; r < k; ++r) {
            p(r, r) *= 0.5;
            for (std::size_t c = r + 1; c < k; ++c) p(r, c) = 0.0;
        }
        // S = L^-T P L^-1 computed as two triangular solves.
        Matrix s = tri_solve_matrix(l, p, TriSide::Upper);           // L^-T P
        s = tri_solve_matrix(l, s.transposed(), TriSide::Upper);     // L^-T (L^-T P)^T = (S)^T
        s = s.transposed();
        Matrix ga(k, k);
        for (std::size_t r = 0; r < k; ++r)
            for (std::size_t c = 0; c < k; ++c) ga(r, c) = 0.5 * (s(r, c) + s(c, r));
        t.accumulate(n.p0, ga);
    }

    static void trisolve_lower(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        const Matrix& l = pval(t, i, 0);
        Matrix gb = tri_solve_matrix(l, n.grad, TriSide::Upper);  // L^-T Cbar
        if (needs(t, n.p0)) {
            Matrix gl = matmul(gb, n.value.transposed());
            for (std::size_t r = 0; r < gl.rows(); ++r)
                for (std::size_t c = 0; c < gl.cols(); ++c)
                    gl(r, c) = (c <= r) ? -gl(r, c) : 0.0;
            t.accumulate(n.p0, gl);
        }
        if (needs(t, n.p1)) t.accumulate(n.p1, gb);
    }

    static void trisolve_upper(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        const Matrix& l = pval(t, i, 0);
        Matrix gb = tri_solve_matrix(l, n.grad, TriSide::Lower);  // L^-1 Cbar
        if (needs(t, n.p0)) {
            Matrix gl = matmul(n.value, gb.transposed());
            for (std::size_t r = 0; r < gl.rows(); ++r)
                for (std::size_t c = 0; c < gl.cols(); ++c)
                    gl(r, c) = (c <= r) ? -gl(r, c) : 0.0;
            t.accumulate(n.p0, gl);
        }
        if (needs(t, n.p1)) t.accumulate(n.p1, gb);
    }

    static void col_smooth_max(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& v = pval(t, i, 0);
        const double tau = n.a0;
        Matrix g(v.rows(), v.cols());
        for (std::size_t j = 0; j < v.cols(); ++j) {
            const double y = n.value(0, j);
            const double gj = n.grad(0, j);
            for (std::size_t r = 0; r < v.rows(); ++r)
                g(r, j) = gj * std::exp((v(r, j) - y) / tau);
        }
        t.accumulate(n.p0, g);
    }

    static void col_hard_max(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& v = pval(t, i, 0);
        Matrix g(v.rows(), v.cols());
        for (std::size_t j = 0; j < v.cols(); ++j) {
            std::size_t arg = 0;
            for (std::size_t r = 1; r < v.rows(); ++r)
                if (v(r, j) > v(arg, j)) arg = r;
            g(arg, j) = n.grad(0, j);
        }
        t.accumulate(n.p0, g);
    }

    static void clip(Tape& t, int i) {
        const auto& n = t.nodes_[i];
        if (!needs(t, n.p0)) return;
        const Matrix& v = pval(t, i, 0);
        Matrix g(v.rows(), v.cols());
        for (std::size_t k = 0; k < v.size(); ++k)
            g.data()[k] = (v.data()[k] > n.a0 && v.data()[k] < n.a1) ? n.grad.data()[k] : 0.0;
        t.accumulate(n.p0, g);
    }

    static const std::unordered_map<int, Fn>& registry() {
        static const std::unordered_map<int, Fn> rules = {
            {static_cast<int>(OpId::Input), leaf},
            {static_cast<int>(OpId::Constant), leaf},
            {static_cast<int>(OpId::Add), add},
            {static_cast<int>(OpId::Sub), sub},
            {static_cast<int>(OpId::Mul), mul},
            {static_cast<int>(OpId::Div), div},
            {static_cast<int>(OpId::Scale), scale},
            {static_cast<int>(OpId::Neg), neg},
            {static_cast<int>(OpId::Exp), exp_},
            {static_cast<int>(OpId::Log), log_},
            {static_cast<int>(OpId::Square), square},
            {static_cast<int>(OpId::Sqrt), sqrt_},
            {static_cast<int>(OpId::Logistic), logistic},
            {static_cast<int>(OpId::MatMul), matmul_},
            {static_cast<int>(OpId::Transpose), transpose},
            {static_cast<int>(OpId::Reshape), reshape},
            {static_cast<int>(OpId::Dot), dot_},
            {static_cast<int>(OpId::Sum), sum},
            {static_cast<int>(OpId::Cumsum), cumsum},
            {static_cast<int>(OpId::PairwiseSqdist), pairwise_sqdist},
            {static_cast<int>(OpId::Cholesky), cholesky_},
            {static_cast<int>(OpId::TriSolveLower), trisolve_lower},
            {static_cast<int>(OpId::TriSolveUpper), trisolve_upper},
            {static_cast<int>(OpId::ColSmoothMax), col_smooth_max},
            {static_cast<int>(OpId::ColHardMax), col_hard_max},
            {static_cast<int>(OpId::Clip), clip},
        };
        return rules;
    }
};

void Tape::backward(Var objective) {
    Node& out = nodes_[objective.idx];
    if (!out.value.is_scalar())
        throw NonScalarObjective("backward: objective must be a 1x1 scalar");
    grad_ref(objective.idx)(0, 0) = 1.0;
    const auto& rules = AdjointRules::registry();
    for (int i = objective.idx; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.requires_grad) continue;
        auto it = rules.find(static_cast<int>(n.op));
        if (it == rules.end())
            throw UnregisteredPrimitive(std::string("no adjoint rule for ") + op_name(n.op));
        it->second(*this, i);
    }
}

std::vector<Matrix> grad(Tape& tape, Var objective, const std::vector<Var>& wrt) {
    tape.backward(objective);
    std::vector<Matrix> out;
    out.reserve(wrt.size());
    for (Var v : wrt) out.push_back(tape.grad(v));
    return out;
}

double smooth_max(const Vector& v, double temperature) {
    if (v.empty()) throw std::invalid_argument("smooth_max: empty vector");
    if (temperature <= 0.0) throw std::invalid_argument("smooth_max: temperature must be > 0");
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    double s = 0.0;
    for (double x : v) s += std::exp((x - m) / temperature);
    return m + temperature * std::log(s);
}

}  // namespace hes
