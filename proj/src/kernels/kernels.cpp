#include <atomic>
#include <cstdlib>
#include <cstring>

#include "dbcd/kernels.hpp"

namespace dbcd::kern {

#if defined(DBCD_WITH_AVX2)
const Ops* avx2_ops();
#endif
#if defined(DBCD_WITH_NEON)
const Ops* neon_ops();
#endif

const Ops* simd_ops() {
#if defined(DBCD_WITH_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return avx2_ops();
    }
#endif
#if defined(DBCD_WITH_NEON)
    return neon_ops();
#endif
    return nullptr;
}

namespace {

std::atomic<const Ops*> g_active{nullptr};

const Ops* choose_default() {
    if (const char* env = std::getenv("DBCD_KERNEL_BACKEND")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_ops();
        if (std::strcmp(env, "simd") == 0) {
            if (const Ops* s = simd_ops()) return s;
            return &scalar_ops();
        }
    }
    if (const Ops* s = simd_ops()) return s;
    return &scalar_ops();
}

} // namespace

const Ops& active() {
    const Ops* ops = g_active.load(std::memory_order_acquire);
    if (!ops) {
        ops = choose_default();
        g_active.store(ops, std::memory_order_release);
    }
    return *ops;
}

void select_backend(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            g_active.store(&scalar_ops(), std::memory_order_release);
            break;
        case Backend::Simd: {
            const Ops* s = simd_ops();
            g_active.store(s ? s : &scalar_ops(), std::memory_order_release);
            break;
        }
        case Backend::Auto:
            g_active.store(choose_default(), std::memory_order_release);
            break;
    }
}

} // namespace dbcd::kern
