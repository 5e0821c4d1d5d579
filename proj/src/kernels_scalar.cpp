#include "matforge/kernels.hpp"

#include <limits>

namespace matforge::kernels::scalar {

NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb) {
    NnHit best{std::numeric_limits<float>::infinity(), -1};
    for (int i = 0; i < count; ++i) {
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
    for (int i = 0; i < count; ++i) {
        if (r[i] < lo[0]) lo[0] = r[i];
        if (r[i] > hi[0]) hi[0] = r[i];
        if (g[i] < lo[1]) lo[1] = g[i];
        if (g[i] > hi[1]) hi[1] = g[i];
        if (b[i] < lo[2]) lo[2] = b[i];
        if (b[i] > hi[2]) hi[2] = b[i];
    }
}

} // namespace matforge::kernels::scalar
