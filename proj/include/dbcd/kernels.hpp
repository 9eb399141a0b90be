#pragma once

#include <cstddef>

#include "dbcd/real.hpp"

// Data-parallel inner loops behind all matrix math. A scalar reference
// implementation always exists; a SIMD variant (AVX2+FMA on x86-64, NEON on
// aarch64) is selected at runtime when the CPU supports it. The two are
// equivalence-tested against each other in tests/test_kernels.cpp.
namespace dbcd::kern {

struct Ops {
    const char* name;

    // c[m x n] = a[m x k] * b[k x n] + beta * c, row-major.
    void (*gemm)(const real* a, const real* b, real* c,
                 std::size_t m, std::size_t k, std::size_t n, real beta);

    // y += a * x
    void (*axpy)(real a, const real* x, real* y, std::size_t n);

    // y = a * x + b * y
    void (*axpby)(real a, const real* x, real b, real* y, std::size_t n);

    // x *= a
    void (*scal)(real a, real* x, std::size_t n);

    real (*dot)(const real* x, const real* y, std::size_t n);

    real (*sum_sq)(const real* x, std::size_t n);

    // sum over i of (x[i] - y[i])^2
    real (*sum_sq_diff)(const real* x, const real* y, std::size_t n);

    // y[i] = max(0, x[i])
    void (*relu)(const real* x, real* y, std::size_t n);

    // Elementwise exact minimizer of
    //   g(u) = gamma/2 (v - relu(u))^2 + gamma/2 (u - q)^2 + alpha/2 (u - p)^2
    // via the two-candidate closed form (active / clipped ReLU regime),
    // ties resolved toward the active candidate.
    void (*relu_prox)(const real* v, const real* q, const real* p, real* u,
                      std::size_t n, real gamma, real alpha);
};

enum class Backend { Auto, Scalar, Simd };

const Ops& scalar_ops();

// nullptr when no SIMD variant is compiled in or the CPU lacks support.
const Ops* simd_ops();

// The active table. Defaults to the best available backend; the
// DBCD_KERNEL_BACKEND environment variable ("scalar" or "simd") overrides.
const Ops& active();

// Explicit selection, used by the equivalence tests. Selecting Simd when
// unavailable falls back to scalar.
void select_backend(Backend backend);

} // namespace dbcd::kern
