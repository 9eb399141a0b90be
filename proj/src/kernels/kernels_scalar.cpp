#include <algorithm>
#include <cstddef>

#include "dbcd/kernels.hpp"

// Reference kernels. Kept deliberately plain: these define the semantics the
// SIMD variants are tested against.
namespace dbcd::kern {
namespace {

void gemm_scalar(const real* a, const real* b, real* c,
                 std::size_t m, std::size_t k, std::size_t n, real beta) {
    for (std::size_t i = 0; i < m; ++i) {
        real* crow = c + i * n;
        if (beta == real(0)) {
            std::fill(crow, crow + n, real(0));
        } else if (beta != real(1)) {
            for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        const real* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const real av = arow[p];
            const real* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy_scalar(real a, const real* x, real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpby_scalar(real a, const real* x, real b, real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void scal_scalar(real a, real* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

real dot_scalar(const real* x, const real* y, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

real sum_sq_scalar(const real* x, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

real sum_sq_diff_scalar(const real* x, const real* y, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const real d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void relu_scalar(const real* x, real* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(real(0), x[i]);
}

void relu_prox_scalar(const real* v, const real* q, const real* p, real* u,
                      std::size_t n, real gamma, real alpha) {
    const real inv_active = real(1) / (real(2) * gamma + alpha);
    const real inv_clipped = real(1) / (gamma + alpha);
    for (std::size_t i = 0; i < n; ++i) {
        const real vi = v[i], qi = q[i], pi = p[i];
        const real u_plus = std::max(real(0), (gamma * vi + gamma * qi + alpha * pi) * inv_active);
        const real u_minus = std::min(real(0), (gamma * qi + alpha * pi) * inv_clipped);
        // relu(u_plus) = u_plus, relu(u_minus) = 0
        const real dvp = vi - u_plus, dqp = u_plus - qi, dpp = u_plus - pi;
        const real g_plus = gamma * (dvp * dvp) + gamma * (dqp * dqp) + alpha * (dpp * dpp);
        const real dqm = u_minus - qi, dpm = u_minus - pi;
        const real g_minus = gamma * (vi * vi) + gamma * (dqm * dqm) + alpha * (dpm * dpm);
        u[i] = (g_plus <= g_minus) ? u_plus : u_minus;
    }
}

} // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        "scalar",
        gemm_scalar,
        axpy_scalar,
        axpby_scalar,
        scal_scalar,
        dot_scalar,
        sum_sq_scalar,
        sum_sq_diff_scalar,
        relu_scalar,
        relu_prox_scalar,
    };
    return ops;
}

} // namespace dbcd::kern
