#include "dbcd/matrix.hpp"

#include <cmath>

#include "dbcd/kernels.hpp"

namespace dbcd {

bool Matrix::all_finite() const {
    for (real v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " * " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    kern::active().gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols(), real(0));
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    }
    return t;
}

void add_scaled(Matrix& y, real s, const Matrix& x) {
    if (!y.same_shape(x)) throw ShapeMismatch("add_scaled: shape mismatch");
    kern::active().axpy(s, x.data(), y.data(), y.size());
}

void blend(real a, const Matrix& x, real b, Matrix& y) {
    if (!y.same_shape(x)) throw ShapeMismatch("blend: shape mismatch");
    kern::active().axpby(a, x.data(), b, y.data(), y.size());
}

void scale(Matrix& x, real s) {
    kern::active().scal(s, x.data(), x.size());
}

Matrix relu(const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    kern::active().relu(x.data(), y.data(), x.size());
    return y;
}

real frob_sq(const Matrix& x) {
    return kern::active().sum_sq(x.data(), x.size());
}

real frob_sq_diff(const Matrix& x, const Matrix& y) {
    if (!x.same_shape(y)) throw ShapeMismatch("frob_sq_diff: shape mismatch");
    return kern::active().sum_sq_diff(x.data(), y.data(), x.size());
}

real max_abs_diff(const Matrix& x, const Matrix& y) {
    if (!x.same_shape(y)) throw ShapeMismatch("max_abs_diff: shape mismatch");
    real m = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const real d = std::fabs(x.data()[i] - y.data()[i]);
        if (d > m) m = d;
    }
    return m;
}

real frob_norm(const Matrix& x) {
    return std::sqrt(frob_sq(x));
}

} // namespace dbcd
