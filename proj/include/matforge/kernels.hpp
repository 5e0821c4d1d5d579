#pragma once

#include <cstdint>

namespace matforge::kernels {

// Hot inner loops of the pixel-index nearest-neighbor search, provided as a
// scalar reference implementation plus an AVX2 variant selected at runtime.
// Both produce bit-identical results (no FMA in the AVX2 path), which the
// equivalence tests assert exactly.

struct NnHit {
    float dist2;
    int32_t index; // caller-space index carried alongside each point
};

// Squared-distance argmin of (qr,qg,qb) over count SoA points. Ties resolve
// to the smallest carried index. count == 0 yields {inf, -1}.
NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb);

// Per-axis min/max over count SoA points (split-axis spread selection).
void minmax3(const float* r, const float* g, const float* b, int count,
             float lo[3], float hi[3]);

enum class Isa { Scalar, Avx2 };

Isa active_isa();
const char* isa_name(Isa isa);

// Test hook: pin the implementation regardless of CPU detection.
void force_isa(Isa isa);
void reset_isa();

// Raw variants, exposed for the equivalence tests.
namespace scalar {
NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb);
void minmax3(const float* r, const float* g, const float* b, int count,
             float lo[3], float hi[3]);
} // namespace scalar

#if defined(MATFORGE_HAVE_AVX2)
namespace avx2 {
NnHit nn_argmin3(const float* r, const float* g, const float* b, const int32_t* idx,
                 int count, float qr, float qg, float qb);
void minmax3(const float* r, const float* g, const float* b, int count,
             float lo[3], float hi[3]);
} // namespace avx2
#endif

} // namespace matforge::kernels
