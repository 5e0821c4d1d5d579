#include "matforge/kernels.hpp"

#if defined(MATFORGE_HAVE_AVX2)

#include <immintrin.h>

#include <limits>

namespace matforge::kernels::avx2 {

// Eight distances per iteration. sub/mul/add only, no FMA: lane arithmetic
// must match the scalar kernel bit-for-bit so the dispatch choice can never
// change a nearest-neighbor result.
NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb) {
    NnHit best{std::numeric_limits<float>::infinity(), -1};
    int i = 0;
    if (count >= 8) {
        const __m256 vqr = _mm256_set1_ps(qr);
        const __m256 vqg = _mm256_set1_ps(qg);
        const __m256 vqb = _mm256_set1_ps(qb);
        __m256 best_d = _mm256_set1_ps(std::numeric_limits<float>::infinity());
        __m256i best_i = _mm256_set1_epi32(-1);
        for (; i + 8 <= count; i += 8) {
            __m256 dr = _mm256_sub_ps(_mm256_loadu_ps(r + i), vqr);
            __m256 dg = _mm256_sub_ps(_mm256_loadu_ps(g + i), vqg);
            __m256 db = _mm256_sub_ps(_mm256_loadu_ps(b + i), vqb);
            __m256 d = _mm256_add_ps(_mm256_add_ps(_mm256_mul_ps(dr, dr), _mm256_mul_ps(dg, dg)),
                                     _mm256_mul_ps(db, db));
            __m256i vi = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(idx + i));
            // (d < best) or (d == best and idx < best_idx)
            __m256 lt = _mm256_cmp_ps(d, best_d, _CMP_LT_OQ);
            __m256 eq = _mm256_cmp_ps(d, best_d, _CMP_EQ_OQ);
            __m256i ilt = _mm256_cmpgt_epi32(best_i, vi);
            __m256 take = _mm256_or_ps(lt, _mm256_and_ps(eq, _mm256_castsi256_ps(ilt)));
            best_d = _mm256_blendv_ps(best_d, d, take);
            best_i = _mm256_castps_si256(
                _mm256_blendv_ps(_mm256_castsi256_ps(best_i), _mm256_castsi256_ps(vi), take));
        }
        alignas(32) float lane_d[8];
        alignas(32) int32_t lane_i[8];
        _mm256_store_ps(lane_d, best_d);
        _mm256_store_si256(reinterpret_cast<__m256i*>(lane_i), best_i);
        for (int k = 0; k < 8; ++k) {
            if (lane_d[k] < best.dist2 ||
                (lane_d[k] == best.dist2 && lane_i[k] >= 0 && lane_i[k] < best.index)) {
                best.dist2 = lane_d[k];
                best.index = lane_i[k];
            }
        }
    }
    for (; i < count; ++i) {
        float dr = r[i] - qr;
        float dg = g[i] - qg;
        float db = b[i] - qb;
        float d = dr * dr + dg * dg + db * db;
        if (d < best.dist2 || (d == best.dist2 && idx[i] < best.index)) {
            best.dist2 = d;
            best.index = idx[i];
        }
    }
    return best;
}

void minmax3(const float* r, const float* g, const float* b, int count,
             float lo[3], float hi[3]) {
    float inf = std::numeric_limits<float>::infinity();
    lo[0] = lo[1] = lo[2] = inf;
    hi[0] = hi[1] = hi[2] = -inf;
    const float* channels[3] = {r, g, b};
    for (int c = 0; c < 3; ++c) {
        const float* p = channels[c];
        int i = 0;
        if (count >= 8) {
            __m256 vlo = _mm256_set1_ps(inf);
            __m256 vhi = _mm256_set1_ps(-inf);
            for (; i + 8 <= count; i += 8) {
                __m256 v = _mm256_loadu_ps(p + i);
                vlo = _mm256_min_ps(vlo, v);
                vhi = _mm256_max_ps(vhi, v);
            }
            alignas(32) float tmp[8];
            _mm256_store_ps(tmp, vlo);
            for (int k = 0; k < 8; ++k)
                if (tmp[k] < lo[c]) lo[c] = tmp[k];
            _mm256_store_ps(tmp, vhi);
            for (int k = 0; k < 8; ++k)
                if (tmp[k] > hi[c]) hi[c] = tmp[k];
        }
        for (; i < count; ++i) {
            if (p[i] < lo[c]) lo[c] = p[i];
            if (p[i] > hi[c]) hi[c] = p[i];
        }
    }
}

} // namespace matforge::kernels::avx2

#endif // MATFORGE_HAVE_AVX2
