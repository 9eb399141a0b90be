#include "dbcd/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <algorithm>
#include <cstddef>

// NEON variants (aarch64). f64 uses 2-lane float64x2_t, f32 4-lane float32x4_t.
namespace dbcd::kern {
namespace {

#if defined(DBCD_REAL32)
using vreal = float32x4_t;
using vmask = uint32x4_t;
constexpr std::size_t kW = 4;
inline vreal vload(const real* p) { return vld1q_f32(p); }
inline void vstore(real* p, vreal v) { vst1q_f32(p, v); }
inline vreal vset1(real a) { return vdupq_n_f32(a); }
inline vreal vzero() { return vdupq_n_f32(0.f); }
inline vreal vadd(vreal a, vreal b) { return vaddq_f32(a, b); }
inline vreal vsub(vreal a, vreal b) { return vsubq_f32(a, b); }
inline vreal vmul(vreal a, vreal b) { return vmulq_f32(a, b); }
inline vreal vfma(vreal a, vreal b, vreal c) { return vfmaq_f32(c, a, b); }
inline vreal vmax(vreal a, vreal b) { return vmaxq_f32(a, b); }
inline vreal vmin(vreal a, vreal b) { return vminq_f32(a, b); }
inline vmask vcmple(vreal a, vreal b) { return vcleq_f32(a, b); }
inline vreal vblend(vreal a, vreal b, vmask mask) { return vbslq_f32(mask, b, a); }
inline real vreduce(vreal v) { return vaddvq_f32(v); }
#else
using vreal = float64x2_t;
using vmask = uint64x2_t;
constexpr std::size_t kW = 2;
inline vreal vload(const real* p) { return vld1q_f64(p); }
inline void vstore(real* p, vreal v) { vst1q_f64(p, v); }
inline vreal vset1(real a) { return vdupq_n_f64(a); }
inline vreal vzero() { return vdupq_n_f64(0.0); }
inline vreal vadd(vreal a, vreal b) { return vaddq_f64(a, b); }
inline vreal vsub(vreal a, vreal b) { return vsubq_f64(a, b); }
inline vreal vmul(vreal a, vreal b) { return vmulq_f64(a, b); }
inline vreal vfma(vreal a, vreal b, vreal c) { return vfmaq_f64(c, a, b); }
inline vreal vmax(vreal a, vreal b) { return vmaxq_f64(a, b); }
inline vreal vmin(vreal a, vreal b) { return vminq_f64(a, b); }
inline vmask vcmple(vreal a, vreal b) { return vcleq_f64(a, b); }
inline vreal vblend(vreal a, vreal b, vmask mask) { return vbslq_f64(mask, b, a); }
inline real vreduce(vreal v) { return vaddvq_f64(v); }
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
        for (std::size_t p = 0; p < k; ++p) {
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
    vreal acc = vzero();
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) acc = vfma(vload(x + i), vload(y + i), acc);
    real s = vreduce(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

real sum_sq_simd(const real* x, std::size_t n) {
    vreal acc = vzero();
    std::size_t i = 0;
    for (; i + kW <= n; i += kW) {
        const vreal v = vload(x + i);
        acc = vfma(v, v, acc);
    }
    real s = vreduce(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
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
    const vreal inv_active = vset1(real(1) / (real(2) * gamma + alpha));
    const vreal inv_clipped = vset1(real(1) / (gamma + alpha));
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
        vstore(u + i, vblend(u_minus, u_plus, vcmple(g_plus, g_minus)));
    }
    if (i < n) {
        scalar_ops().relu_prox(v + i, q + i, p + i, u + i, n - i, gamma, alpha);
    }
}

} // namespace

const Ops* neon_ops() {
    static const Ops ops{
        "neon",
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

#endif // __aarch64__ && __ARM_NEON
