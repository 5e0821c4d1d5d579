#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "matforge/render.hpp"

namespace matforge {

struct RegionMask {
    int view_id = 0;
    int label = 0; // SoM mark, 1-based, contiguous per view
    int width = 0;
    int height = 0;
    std::vector<uint8_t> mask; // 0/1
    int64_t pixel_count = 0;
    float mean_diffuse_rgb[3] = {0, 0, 0};

    bool test(int x, int y) const { return mask[size_t(y) * width + x] != 0; }
    void set(int x, int y, bool v) { mask[size_t(y) * width + x] = v ? 1 : 0; }
};

struct AnnotatedImage {
    TextureMap image; // render with marks burned in
    struct Mark {
        int label;
        int anchor_x;
        int anchor_y;
    };
    std::vector<Mark> marks;
};

struct SegParams {
    int k_max = 8;
    uint32_t seed = 7;
    float elbow_threshold = 0.3f;   // keep splitting while inertia drops this much
    float merge_fraction = 0.005f;  // components below 0.5% of foreground get merged
    float dust_fraction = 0.002f;   // post-filter masks below 0.2% of foreground get dropped
};

// Per-view binary mask PNGs named view<k>_region<j>.png, clipped to the
// G-buffer foreground; empty-after-clipping masks are dropped and labels
// renumbered in filename order.
std::vector<RegionMask> load_masks(const std::filesystem::path& dir, int view_id,
                                   const RenderOutput& render);

// Deterministic stand-in segmenter: seeded k-means++ over foreground RGB with
// an elbow-selected k, split into connected components, dust merged into the
// nearest-mean neighboring region.
std::vector<RegionMask> fallback_segment(const RenderOutput& render, int k_max,
                                         const SegParams& params = {});

struct FilterReport {
    int64_t dust_pixels_dropped = 0;
    int dust_masks_dropped = 0;
};

// Overlap resolution: each contested pixel goes to the smaller mask; masks
// that end up under the dust threshold are deleted. Output is disjoint,
// labels contiguous from 1.
std::vector<RegionMask> filter_masks(std::vector<RegionMask> masks,
                                     const SegParams& params = {},
                                     FilterReport* report = nullptr);

// Burns white-on-black numeric marks at each mask's pole of inaccessibility.
AnnotatedImage annotate_som(const RenderOutput& render, const std::vector<RegionMask>& masks);

// Interior pixel maximizing distance to the mask boundary (ties: lowest row,
// then lowest column). Exposed for tests.
void pole_of_inaccessibility(const RegionMask& mask, int& out_x, int& out_y);

// Exact squared Euclidean distance transform to the nearest zero pixel
// (out-of-image counts as zero). Exposed for tests.
std::vector<float> squared_edt(const std::vector<uint8_t>& grid, int width, int height);

void recompute_mask_stats(RegionMask& mask, const TextureMap& color);

} // namespace matforge
