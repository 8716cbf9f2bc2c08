#include <doctest.h>

#include <cmath>

#include "hes/linalg.hpp"
#include "hes/rng.hpp"

using namespace hes;

namespace {

Matrix random_spd(RngStream& rng, std::size_t n) {
    Matrix b(n, n);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b(i, k) * b(j, k);
            a(i, j) = s + (i == j ? 1.0 : 0.0);
        }
    return a;
}

// Dense inverse via Gauss-Jordan, the oracle for the solve round-trip.
Matrix dense_inverse(Matrix a) {
    const std::size_t n = a.rows();
    Matrix inv = Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(a(col, c), a(pivot, c));
            std::swap(inv(col, c), inv(pivot, c));
        }
        const double p = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= p;
            inv(col, c) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

}  // namespace

TEST_CASE("cholesky of the identity needs no jitter") {
    const CholFactor f = cholesky(Matrix::identity(3), 0.0);
    CHECK(f.jitter_applied == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(f.lower(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-15));
}

TEST_CASE("cholesky of a scalar is the square root") {
    Matrix a(1, 1);
    a(0, 0) = 4.0;
    const CholFactor f = cholesky(a, 0.0);
    CHECK(f.lower(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("cholesky reconstructs a seeded SPD matrix") {
    RngStream rng(42);
    const Matrix a = random_spd(rng, 5);
    const CholFactor f = cholesky(a, 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += f.lower(i, k) * f.lower(j, k);
            err = std::max(err, std::abs(s - a(i, j)));
        }
    CHECK(err <= 1e-10);
}

TEST_CASE("cholesky reconstruction bound holds across seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rng(seed);
        const std::size_t n = 2 + seed % 6;
        const Matrix a = random_spd(rng, n);
        const CholFactor f = cholesky(a, kDefaultJitter);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += f.lower(i, k) * f.lower(j, k);
                err = std::max(err, std::abs(s - (a(i, j) + (i == j ? f.jitter_applied : 0.0))));
            }
        CHECK(err <= 1e-8 * (1.0 + a.max_abs()));
        for (std::size_t i = 0; i < n; ++i) CHECK(f.lower(i, i) > 0.0);
    }
}

TEST_CASE("cholesky errors") {
    Matrix asym(2, 2);
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(cholesky(asym, 0.0), AsymmetricInput);

    Matrix indef(2, 2);
    indef(0, 0) = 1.0;
    indef(1, 1) = -1.0;
    CHECK_THROWS_AS(cholesky(indef, kDefaultJitter), NotPositiveDefinite);

    CHECK_THROWS_AS(cholesky(Matrix(2, 3), 0.0), DimensionMismatch);
}

TEST_CASE("jitter escalation recovers a slightly indefinite matrix") {
    Matrix a = Matrix::identity(2);
    a(0, 0) = -1e-7;  // needs jitter above 1e-7
    const CholFactor f = cholesky(a, 1e-8);
    CHECK(f.jitter_applied >= 1e-7);
    CHECK(f.jitter_applied <= 1e-2);
}

TEST_CASE("tri_solve identity and hand case") {
    const CholFactor id = cholesky(Matrix::identity(3), 0.0);
    const Vector b{1.0, 2.0, 3.0};
    const Vector x = tri_solve(id, b, TriSide::Lower);
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    CHECK(x[2] == doctest::Approx(3.0));

    Matrix l(2, 2);
    l(0, 0) = 2.0;
    l(1, 0) = 1.0;
    l(1, 1) = 1.0;
    const Vector y = tri_solve(l, Vector{2.0, 2.0}, TriSide::Lower);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));

    CHECK_THROWS_AS(tri_solve(l, Vector{1.0, 2.0, 3.0}, TriSide::Lower), DimensionMismatch);
}

TEST_CASE("solve round-trip matches the dense inverse on 4x4") {
    RngStream rng(7);
    const Matrix a = random_spd(rng, 4);
    const CholFactor f = cholesky(a, 0.0);
    const Matrix inv = dense_inverse(a);
    const Vector b{0.3, -1.2, 2.0, 0.7};
    const Vector x = tri_solve(f, tri_solve(f, b, TriSide::Lower), TriSide::Upper);
    for (std::size_t i = 0; i < 4; ++i) {
        double want = 0.0;
        for (std::size_t j = 0; j < 4; ++j) want += inv(i, j) * b[j];
        CHECK(std::abs(x[i] - want) <= 1e-9);
    }
}

TEST_CASE("tri_solve inverts triangular multiplication") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        RngStream rng(100 + seed);
        const std::size_t n = 3 + seed % 4;
        Matrix l(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < i; ++j) l(i, j) = 0.3 * rng.normal();
            l(i, i) = 1.0 + rng.uniform();  // well conditioned
        }
        const Vector x0 = rng.normal_vector(n);
        Vector b(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j <= i; ++j) b[i] += l(i, j) * x0[j];
        const Vector x = tri_solve(l, b, TriSide::Lower);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(x[i] - x0[i]) <= 1e-10);
    }
}

TEST_CASE("matmul and matvec basics") {
    Matrix a(2, 3);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = static_cast<double>(i + 1);
    const Matrix at = a.transposed();
    const Matrix g = matmul(a, at);
    CHECK(g(0, 0) == doctest::Approx(1 + 4 + 9));
    CHECK(g(0, 1) == doctest::Approx(4 + 10 + 18));
    CHECK(g(1, 0) == g(0, 1));
    const Vector v = matvec(a, Vector{1.0, 0.0, -1.0});
    CHECK(v[0] == doctest::Approx(1 - 3));
    CHECK(v[1] == doctest::Approx(4 - 6));
    CHECK_THROWS_AS(matmul(a, a), DimensionMismatch);
}
