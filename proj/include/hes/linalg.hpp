#pragma once

#include <cstddef>
#include <vector>

#include "hes/errors.hpp"

namespace hes {

using Vector = std::vector<double>;

// Dense real matrix, row-major. Sized for problems of at most a few hundred
// rows; no blocked or sparse paths.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<Vector>& rows);
    static Matrix col_vector(const Vector& v);
    static Matrix row_vector(const Vector& v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    double scalar() const { return data_[0]; }

    Vector to_vector() const { return data_; }

    Matrix transposed() const;
    double max_abs() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Lower-triangular Cholesky factor together with the diagonal jitter that was
// added to make the factorization succeed.
struct CholFactor {
    Matrix lower;
    double jitter_applied = 0.0;

    std::size_t dim() const { return lower.rows(); }
};

enum class TriSide { Lower, Upper };

// Factors A + jitter*I = L L^T, attempting jitter 0 first and then the
// escalation schedule base_jitter * 10^j for j = 0..6. Near-zero pivots of a
// positive semi-definite input are floored so degenerate posteriors (exact
// interpolation) factor without jitter.
CholFactor cholesky(const Matrix& a, double base_jitter);

// Solves L x = b (Lower) or L^T x = b (Upper) by substitution.
Vector tri_solve(const CholFactor& l, const Vector& b, TriSide side);
Vector tri_solve(const Matrix& lower, const Vector& b, TriSide side);

// Column-wise variant: solves for every column of B.
Matrix tri_solve_matrix(const Matrix& lower, const Matrix& b, TriSide side);

Matrix matmul(const Matrix& a, const Matrix& b);
Vector matvec(const Matrix& a, const Vector& x);
double dot(const Vector& a, const Vector& b);

constexpr double kDefaultJitter = 1e-8;

}  // namespace hes
