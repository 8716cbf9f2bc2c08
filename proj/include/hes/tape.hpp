#pragma once

#include <string>
#include <vector>

#include "hes/linalg.hpp"

namespace hes {

// Primitive operations with registered adjoint rules. Values are dense
// matrices; a vector is n x 1 and a scalar is 1 x 1. Elementwise binary ops
// broadcast a 1 x 1 operand against any shape.
enum class OpId : int {
    Input,
    Constant,
    Add,
    Sub,
    Mul,
    Div,
    Scale,        // a0 * x + a1, elementwise
    Neg,
    Exp,
    Log,
    Square,
    Sqrt,
    Logistic,
    MatMul,
    Transpose,
    Reshape,
    Dot,          // column vectors -> 1 x 1
    Sum,          // all entries -> 1 x 1
    Cumsum,       // column vector, inclusive prefix sums
    PairwiseSqdist,  // row-wise points: (p x d, q x d) -> p x q
    Cholesky,     // lower factor of symmetrized input (+ jitter escalation)
    TriSolveLower,   // L^-1 B
    TriSolveUpper,   // L^-T B
    ColSmoothMax,    // K x N -> 1 x N, temperature a0
    ColHardMax,      // K x N -> 1 x N, subgradient to first attaining row
    Clip,            // clamp to [a0, a1]
};

const char* op_name(OpId op);

struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so creation
// order is a topological order and backward() is a single reverse sweep.
// Gradients only flow into nodes created with input(); constants never
// allocate gradient storage, which keeps the fixed GP factors cheap to use.
class Tape {
public:
    Var input(Matrix value);
    Var constant(Matrix value);
    Var constant_scalar(double value);

    const Matrix& value(Var v) const { return nodes_[v.idx].value; }
    const Matrix& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_[v.idx].requires_grad; }

    // Seeds d(objective)/d(objective) = 1 and runs the reverse sweep.
    // The objective must be 1 x 1.
    void backward(Var objective);

    std::size_t size() const { return nodes_.size(); }

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var div(Var a, Var b);
    Var scale(Var a, double mult, double shift = 0.0);
    Var neg(Var a);
    Var exp_(Var a);
    Var log_(Var a);
    Var square(Var a);
    Var sqrt_(Var a);
    Var logistic(Var a);
    Var matmul_(Var a, Var b);
    Var transpose(Var a);
    Var reshape(Var a, std::size_t rows, std::size_t cols);
    Var dot_(Var a, Var b);
    Var sum(Var a);
    Var cumsum(Var a);
    Var pairwise_sqdist(Var a, Var b);
    Var cholesky_(Var a, double base_jitter = kDefaultJitter);
    Var trisolve_lower(Var lower, Var rhs);
    Var trisolve_upper(Var lower, Var rhs);
    Var col_smooth_max(Var a, double temperature);
    Var col_hard_max(Var a);
    Var clip(Var a, double lo, double hi);

private:
    friend struct AdjointRules;

    struct Node {
        Matrix value;
        OpId op;
        int p0 = -1;
        int p1 = -1;
        double a0 = 0.0;
        double a1 = 0.0;
        bool requires_grad = false;
        Matrix grad;  // empty until touched by backward
    };

    Var push(Matrix value, OpId op, int p0 = -1, int p1 = -1, double a0 = 0.0, double a1 = 0.0);
    Matrix& grad_ref(int idx);
    void accumulate(int idx, const Matrix& contribution);

    std::vector<Node> nodes_;
};

// Gradient of a scalar objective with respect to each requested input.
std::vector<Matrix> grad(Tape& tape, Var objective, const std::vector<Var>& wrt);

// Plain smooth maximum: temperature * log sum exp(v_i / temperature),
// guarded against overflow by max subtraction. Tends to max(v) as the
// temperature goes to zero and always dominates it.
double smooth_max(const Vector& v, double temperature);

}  // namespace hes
