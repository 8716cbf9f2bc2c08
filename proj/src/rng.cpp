#include "hes/rng.hpp"

#include <cmath>

namespace hes {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream RngStream::fork(std::uint64_t salt) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(salt + 0x9E3779B97F4A7C15ULL)));
}

double RngStream::uniform() {
    return (engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Vector RngStream::normal_vector(std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = normal();
    return v;
}

Vector antithetic_normal_vector(RngStream& rng, std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i + 1 < n; i += 2) {
        v[i] = rng.normal();
        v[i + 1] = -v[i];
    }
    if (n % 2 == 1) v[n - 1] = rng.normal();
    return v;
}

Matrix antithetic_normal_columns(RngStream& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t j = 0; j + 1 < cols; j += 2)
        for (std::size_t i = 0; i < rows; ++i) {
            m(i, j) = rng.normal();
            m(i, j + 1) = -m(i, j);
        }
    if (cols % 2 == 1)
        for (std::size_t i = 0; i < rows; ++i) m(i, cols - 1) = rng.normal();
    return m;
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

Vector stratified_normal_vector(RngStream& rng, std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = normal_quantile((i + rng.uniform()) / static_cast<double>(n));
    return v;
}

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};

double halton(std::size_t index, int base) {
    double f = 1.0;
    double r = 0.0;
    std::size_t i = index;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

}  // namespace

std::vector<Vector> halton_points(std::size_t count, const Vector& lo, const Vector& hi) {
    const std::size_t d = lo.size();
    if (hi.size() != d) throw DimensionMismatch("halton_points: box dimension mismatch");
    if (d > sizeof(kPrimes) / sizeof(kPrimes[0]))
        throw DimensionMismatch("halton_points: dimension exceeds prime table");
    std::vector<Vector> pts(count, Vector(d));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < d; ++j)
            pts[i][j] = lo[j] + (hi[j] - lo[j]) * halton(i + 1, kPrimes[j]);
    return pts;
}

}  // namespace hes
