#include "dbcd/numerics.hpp"

#include <cmath>
#include <string>

namespace dbcd {
namespace {

constexpr real kPivotFloor = real(1e-12);

void check_symmetric(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw ShapeMismatch("cholesky_factor: matrix is " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
    }
    real max_abs = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_abs = std::max(max_abs, std::fabs(a.data()[i]));
    }
    const real tol = real(1e-10) * (real(1) + max_abs);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            if (std::fabs(a(i, j) - a(j, i)) > tol) {
                throw ShapeMismatch("cholesky_factor: matrix not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

} // namespace

Matrix cholesky_factor(const Matrix& a) {
    check_symmetric(a);
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        real diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (diag <= kPivotFloor) {
            throw NotPositiveDefinite("cholesky_factor: pivot " + std::to_string(diag) +
                                      " at column " + std::to_string(j));
        }
        const real ljj = std::sqrt(diag);
        l(j, j) = ljj;
        const real inv = real(1) / ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            real s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s * inv;
        }
    }
    return l;
}

Matrix solve_cholesky(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows();
    if (b.rows() != n) throw ShapeMismatch("solve_cholesky: rhs row count mismatch");
    const std::size_t m = b.cols();
    // Forward: L z = b.
    Matrix z = b;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) {
            const real lik = l(i, k);
            if (lik == real(0)) continue;
            for (std::size_t c = 0; c < m; ++c) z(i, c) -= lik * z(k, c);
        }
        const real inv = real(1) / l(i, i);
        for (std::size_t c = 0; c < m; ++c) z(i, c) *= inv;
    }
    // Backward: L^T x = z.
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) {
            const real lki = l(k, ii);
            if (lki == real(0)) continue;
            for (std::size_t c = 0; c < m; ++c) z(ii, c) -= lki * z(k, c);
        }
        const real inv = real(1) / l(ii, ii);
        for (std::size_t c = 0; c < m; ++c) z(ii, c) *= inv;
    }
    return z;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    return solve_cholesky(cholesky_factor(a), b);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, real scale, SeededRng& rng) {
    if (!(scale > real(0))) {
        throw ValueOutOfRange("gaussian_matrix: scale must be > 0");
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m.data()[i] = scale * static_cast<real>(rng.normal());
    }
    return m;
}

Matrix solve_spd_auto_ridge(Matrix a, const Matrix& b, const char* context) {
    try {
        return solve_spd(a, b);
    } catch (const NotPositiveDefinite&) {
        real trace = 0;
        for (std::size_t i = 0; i < a.rows(); ++i) trace += a(i, i);
        const real ridge = real(1e-10) * trace / static_cast<real>(a.rows());
        warn(std::string(context) + ": near-singular system, retrying with ridge " +
             std::to_string(ridge));
        for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += ridge;
        return solve_spd(a, b);
    }
}

} // namespace dbcd
