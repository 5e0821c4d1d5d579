#include "matforge/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace matforge::kernels {

namespace {

Isa detect_isa() {
#if defined(MATFORGE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    if (__builtin_cpu_supports("avx2")) return Isa::Avx2;
#endif
    return Isa::Scalar;
}

Isa resolve_default() {
    // MATFORGE_ISA=scalar|avx2 overrides detection (diagnostics, CI).
    if (const char* env = std::getenv("MATFORGE_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
#if defined(MATFORGE_HAVE_AVX2)
        if (std::strcmp(env, "avx2") == 0 && detect_isa() == Isa::Avx2) return Isa::Avx2;
#endif
    }
    return detect_isa();
}

std::atomic<Isa> g_isa{resolve_default()};

} // namespace

Isa active_isa() { return g_isa.load(std::memory_order_relaxed); }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
#if !defined(MATFORGE_HAVE_AVX2)
    if (isa == Isa::Avx2) return;
#endif
    g_isa.store(isa, std::memory_order_relaxed);
}

void reset_isa() { g_isa.store(resolve_default(), std::memory_order_relaxed); }

NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb) {
#if defined(MATFORGE_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) return avx2::nn_argmin3(r, g, b, idx, count, qr, qg, qb);
#endif
    return scalar::nn_argmin3(r, g, b, idx, count, qr, qg, qb);
}

void minmax3(const float* r, const float* g, const float* b, int count,
             float lo[3], float hi[3]) {
#if defined(MATFORGE_HAVE_AVX2)
    if (active_isa() == Isa::Avx2) {
        avx2::minmax3(r, g, b, count, lo, hi);
        return;
    }
#endif
    scalar::minmax3(r, g, b, count, lo, hi);
}

} // namespace matforge::kernels
