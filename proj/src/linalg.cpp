#include "hes/linalg.hpp"

#include <cmath>
#include <cstdlib>

namespace hes {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) return Matrix();
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw DimensionMismatch("from_rows: ragged rows");
        for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

Matrix Matrix::col_vector(const Vector& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

Matrix Matrix::row_vector(const Vector& v) {
    Matrix m(1, v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m(0, j) = v[j];
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

namespace {

// Attempts one factorization of A + jitter*I. Pivots that are tiny relative
// to the matrix scale are floored, so exact positive semi-definite inputs
// succeed; pivots below -neg_tol abort the attempt.
bool try_cholesky(const Matrix& a, double jitter, Matrix& lower) {
    const std::size_t n = a.rows();
    lower = Matrix(n, n);
    double scale = a.max_abs() + jitter;
    if (scale == 0.0) scale = 1.0;
    const double neg_tol = 1e-10 * scale;
    const double floor = 1e-16 * scale;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) + jitter;
        for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
        if (d < -neg_tol) return false;
        if (d < floor) d = floor;
        const double ljj = std::sqrt(d);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j) + (i == j ? jitter : 0.0);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

}  // namespace

CholFactor cholesky(const Matrix& a, double base_jitter) {
    if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: input not square");
    const std::size_t n = a.rows();
    const double sym_tol = 1e-10;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > sym_tol)
                throw AsymmetricInput("cholesky: input exceeds symmetry tolerance");

    CholFactor f;
    if (try_cholesky(a, 0.0, f.lower)) {
        f.jitter_applied = 0.0;
        return f;
    }
    for (int j = 0; j <= 6; ++j) {
        const double jitter = base_jitter * std::pow(10.0, j);
        if (jitter > 0.0 && try_cholesky(a, jitter, f.lower)) {
            f.jitter_applied = jitter;
            return f;
        }
    }
    throw NotPositiveDefinite("cholesky: all jitter levels failed");
}

Vector tri_solve(const Matrix& lower, const Vector& b, TriSide side) {
    const std::size_t n = lower.rows();
    if (b.size() != n) throw DimensionMismatch("tri_solve: rhs length mismatch");
    Vector x(n);
    if (side == TriSide::Lower) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = b[i];
            for (std::size_t k = 0; k < i; ++k) s -= lower(i, k) * x[k];
            x[i] = s / lower(i, i);
        }
    } else {
        for (std::size_t ii = n; ii-- > 0;) {
            double s = b[ii];
            for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * x[k];
            x[ii] = s / lower(ii, ii);
        }
    }
    return x;
}

Vector tri_solve(const CholFactor& l, const Vector& b, TriSide side) {
    return tri_solve(l.lower, b, side);
}

Matrix tri_solve_matrix(const Matrix& lower, const Matrix& b, TriSide side) {
    const std::size_t n = lower.rows();
    if (b.rows() != n) throw DimensionMismatch("tri_solve_matrix: rhs rows mismatch");
    Matrix x(n, b.cols());
    Vector col(n);
    for (std::size_t j = 0; j < b.cols(); ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
        Vector sol = tri_solve(lower, col, side);
        for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
    }
    return x;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k);
            double* crow = c.data() + i * c.cols();
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols() != x.size()) throw DimensionMismatch("matvec: dimension mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[i] = s;
    }
    return y;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace hes
