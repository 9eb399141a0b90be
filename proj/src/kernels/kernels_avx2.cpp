#include "dbcd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cstddef>

// AVX2+FMA variants of the reference kernels. f64 uses 4-lane __m256d,
// f32 (DBCD_REAL32) uses 8-lane __m256.
namespace dbcd::kern {
namespace {

#if defined(DBCD_REAL32)
using vreal = __m256;
constexpr std::size_t kW = 8;
inline vreal vload(const real* p) { return _mm256_loadu_ps(p); }
inline void vstore(real* p, vreal v) { _mm256_storeu_ps(p, v); }
inline vreal vset1(real a) { return _mm256_set1_ps(a); }
inline vreal vzero() { return _mm256_setzero_ps(); }
inline vreal vadd(vreal a, vreal b) { return _mm256_add_ps(a, b); }
inline vreal vsub(vreal a, vreal b) { return _mm256_sub_ps(a, b); }
inline vreal vmul(vreal a, vreal b) { return _mm256_mul_ps(a, b); }
inline vreal vfma(vreal a, vreal b, vreal c) { return _mm256_fmadd_ps(a, b, c); }
inline vreal vmax(vreal a, vreal b) { return _mm256_max_ps(a, b); }
inline vreal vmin(vreal a, vreal b) { return _mm256_min_ps(a, b); }
inline vreal vdiv(vreal a, vreal b) { return _mm256_div_ps(a, b); }
inline vreal vcmple(vreal a, vreal b) { return _mm256_cmp_ps(a, b, _CMP_LE_OQ); }
inline vreal vblend(vreal a, vreal b, vreal mask) { return _mm256_blendv_ps(a, b, mask); }
inline real vreduce(vreal v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
}
#else
using vreal = __m256d;
constexpr std::size_t kW = 4;
inline vreal vload(const real* p) { return _mm256_loadu_pd(p); }
inline void vstore(real* p, vreal v) { _mm256_storeu_pd(p, v); }
inline vreal vset1(real a) { return _mm256_set1_pd(a); }
inline vreal vzero() { return _mm256_setzero_pd(); }
inline vreal vadd(vreal a, vreal b) { return _mm256_add_pd(a, b); }
inline vreal vsub(vreal a, vreal b) { return _mm256_sub_pd(a, b); }
inline vreal vmul(vreal a, vreal b) { return _mm256_mul_pd(a, b); }
inline vreal vfma(vreal a, vreal b, vreal c) { return _mm256_fmadd_pd(a, b, c); }
inline vreal vmax(vreal a, vreal b) { return _mm256_max_pd(a, b); }
inline vreal vmin(vreal a, vreal b) { return _mm256_min_pd(a, b); }
inline vreal vdiv(vreal a, vreal b) { return _mm256_div_pd(a, b); }
inline vreal vcmple(vreal a, vreal b) { return _mm256_cmp_pd(a, b, _CMP_LE_OQ); }
inline vreal vblend(vreal a, vreal b, vreal mask) { return _mm256_blendv_pd(a, b, mask); }
inline real vreduce(vreal v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    lo = _mm_add_sd(lo, swap);
    return _mm_cvtsd_f64(lo);
}
#endif

void gemm_simd(const real* a, const real* b, real* c,
               std::size_t m, std::size_t k, std::size_t n, real beta) {
    for (std::size_t i = 0; i < m; ++i) {
        real* crow = c + i * n;
        if (beta == real(0)) {
            std::fill(crow, crow + n, real(0));
        } else if (beta != real(1)) {
            for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        const real* arow = a + i * k;
        std::size_t p = 0;
        // Four b-rows per pass so each c vector is loaded/stored once per four FMAs.
        for (; p + 4 <= k; p += 4) {
            const vreal a0 = vset1(arow[p + 0]);
            const vreal a1 = vset1(arow[p + 1]);
            const vreal a2 = vset1(arow[p + 2]);
            const vreal a3 = vset1(arow[p + 3]);
            const real* b0 = b + (p + 0) * n;
            const real* b1 = b + (p + 1) * n;
            const real* b2 = b + (p + 2) * n;
            const real* b3 = b + (p + 3) * n;
            std::size_t j = 0;
            for (; j + kW <= n; j += kW) {
                vreal vc = vload(crow + j);
                vc = vfma(a0, vload(b0 + j), vc);
                vc = vfma(a1, vload(b1 + j), vc);
                vc = vfma(a2, vload(b2 + j), vc);
                vc = vfma(a3, vload(b3 + j), vc);
                vstore(crow + j, vc);
            }
            for (; j < n; ++j) {
                crow[j] += arow[p + 0] * b0[j] + arow[p + 1] * b1[j] +
                           arow[p + 2] * b2[j] + arow[p + 3] * b3[j];
            }
        }
        for (; p < k; ++p) {
            const vreal av = vset1(arow[p]);
            const real* brow = b + p * n;
            std::size_t j = 0;
            for (; j + kW <= n; j += kW) {
                vstore(crow + j, vfma(av, vload(brow + j), vload(crow + j)));
            }
            for (; j < n; ++j) crow[j] += arow[p] * brow[j];
        }
    }
}

void axpy_simd(real a, const real* x, real* y, std::size_t n) {
    const vreal va = vset1(a);
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) {
        vstore(y + i, vfma(va, vload(x + i), vload(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void axpby_simd(real a, const real* x, real b, real* y, std::size_t n) {
    const vreal va = vset1(a);
    const vreal vb = vset1(b);
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) {
        vstore(y + i, vfma(va, vload(x + i), vmul(vb, vload(y + i))));
    }
    for (; i < n; ++i) y[i] = a * x[i] + b * y[i];
}

void scal_simd(real a, real* x, std::size_t n) {
    const vreal va = vset1(a);
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) vstore(x + i, vmul(va, vload(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

real dot_simd(const real* x, const real* y, std::size_t n) {
    vreal acc0 = vzero(), acc1 = vzero();
    std::size_t i = 0;
    for (; i + 2 * kW <= n; i += 2 * kW) {
        acc0 = vfma(vload(x + i), vload(y + i), acc0);
        acc1 = vfma(vload(x + i + kW), vload(y + i + kW), acc1);
    }
    for (; i + kW <= n; i += kW) acc0 = vfma(vload(x + i), vload(y + i), acc0);
    real acc = vreduce(vadd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

real sum_sq_simd(const real* x, std::size_t n) {
    vreal acc0 = vzero(), acc1 = vzero();
    std::size_t i = 0;
    for (; i + 2 * kW <= n; i += 2 * kW) {
        const vreal v0 = vload(x + i);
        const vreal v1 = vload(x + i + kW);
        acc0 = vfma(v0, v0, acc0);
        acc1 = vfma(v1, v1, acc1);
    }
    for (; i + kW <= n; i += kW) {
        const vreal v = vload(x + i);
        acc0 = vfma(v, v, acc0);
    }
    real acc = vreduce(vadd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

real sum_sq_diff_simd(const real* x, const real* y, std::size_t n) {
    vreal acc = vzero();
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) {
        const vreal d = vsub(vload(x + i), vload(y + i));
        acc = vfma(d, d, acc);
    }
    real s = vreduce(acc);
    for (; i < n; ++i) {
        const real d = x[i] - y[i];
        s += d * d;
    }
    return s;
}

void relu_simd(const real* x, real* y, std::size_t n) {
    const vreal z = vzero();
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) vstore(y + i, vmax(z, vload(x + i)));
    for (; i < n; ++i) y[i] = std::max(real(0), x[i]);
}

void relu_prox_simd(const real* v, const real* q, const real* p, real* u,
                    std::size_t n, real gamma, real alpha) {
    const vreal vg = vset1(gamma);
    const vreal va = vset1(alpha);
    const vreal inv_active = vdiv(vset1(real(1)), vset1(real(2) * gamma + alpha));
    const vreal inv_clipped = vdiv(vset1(real(1)), vset1(gamma + alpha));
    const vreal z = vzero();
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) {
        const vreal vi = vload(v + i);
        const vreal qi = vload(q + i);
        const vreal pi = vload(p + i);
        const vreal gq_ap = vadd(vmul(vg, qi), vmul(va, pi));
        const vreal u_plus = vmax(z, vmul(vadd(vmul(vg, vi), gq_ap), inv_active));
        const vreal u_minus = vmin(z, vmul(gq_ap, inv_clipped));
        const vreal dvp = vsub(vi, u_plus);
        const vreal dqp = vsub(u_plus, qi);
        const vreal dpp = vsub(u_plus, pi);
        vreal g_plus = vmul(vg, vmul(dvp, dvp));
        g_plus = vadd(g_plus, vmul(vg, vmul(dqp, dqp)));
        g_plus = vadd(g_plus, vmul(va, vmul(dpp, dpp)));
        const vreal dqm = vsub(u_minus, qi);
        const vreal dpm = vsub(u_minus, pi);
        vreal g_minus = vmul(vg, vmul(vi, vi));
        g_minus = vadd(g_minus, vmul(vg, vmul(dqm, dqm)));
        g_minus = vadd(g_minus, vmul(va, vmul(dpm, dpm)));
        // g_plus <= g_minus selects the active candidate (ties included).
        vstore(u + i, vblend(u_minus, u_plus, vcmple(g_plus, g_minus)));
    }
    if (i < n) {
        scalar_ops().relu_prox(v + i, q + i, p + i, u + i, n - i, gamma, alpha);
    }
}

} // namespace

const Ops* avx2_ops() {
    static const Ops ops{
        "avx2",
        gemm_simd,
        axpy_simd,
        axpby_simd,
        scal_simd,
        dot_simd,
        sum_sq_simd,
        sum_sq_diff_simd,
        relu_simd,
        relu_prox_simd,
    };
    return &ops;
}

} // namespace dbcd::kern

#endif // __AVX2__ && __FMA__
