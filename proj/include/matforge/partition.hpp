#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matforge/mesh.hpp"
#include "matforge/render.hpp"
#include "matforge/seg.hpp"

namespace matforge {

// Texture-grid occupancy: texel centers inside (or one texel away from) some
// face's UV triangle.
struct OccupancyGrid {
    int size = 0; // square, texture resolution
    std::vector<uint8_t> occupied;

    bool test(int x, int y) const { return occupied[size_t(y) * size + x] != 0; }
    int64_t count() const;
};

OccupancyGrid build_occupancy(const Mesh& mesh, int tex_size);

// Point-in-UV-triangle scan without the dilation band; the oracle side of the
// occupancy contract.
OccupancyGrid build_occupancy_undilated(const Mesh& mesh, int tex_size);

struct UVMask {
    int tex_size = 0;
    int view_id = 0;
    int label = 0;
    std::vector<uint8_t> texels;
    std::vector<float> depth; // min contributing view depth per texel
    int64_t texel_count = 0;

    bool test(int x, int y) const { return texels[size_t(y) * tex_size + x] != 0; }
};

// Screen mask -> UV texels via the G-buffer, then one dilation step inside
// the occupancy grid to close sampling pinholes. Only z-visible surfels
// contribute.
UVMask backproject_mask(const RegionMask& mask, const GBuffer& gbuffer, int tex_size,
                        const OccupancyGrid& occupancy);

constexpr int32_t kUnoccupied = -2;
constexpr int32_t kUnassigned = -1;

struct PartitionMap {
    int tex_size = 0;
    std::vector<int32_t> material;            // per texel: legend index or sentinel
    std::vector<std::string> legend;          // legend index -> material id

    int32_t at(int x, int y) const { return material[size_t(y) * tex_size + x]; }
    int64_t count_of(int32_t value) const;
    int legend_index(const std::string& material_id) const;
};

// Per-texel majority vote across view masks; ties go to the smallest
// contributing depth; texels nobody saw stay UNASSIGNED.
PartitionMap merge_views(const std::vector<std::pair<UVMask, std::string>>& labeled,
                         const OccupancyGrid& occupancy);

// Mean-color clustering of the leftovers: every UNASSIGNED occupied texel
// adopts the assigned material with the nearest mean diffuse RGB.
PartitionMap refine_missing(PartitionMap part, const TextureMap& diffuse,
                            const OccupancyGrid& occupancy);

// Indexed-color PNG + JSON legend (palette index 0 = unoccupied,
// 1 = unassigned, materials from 2).
void save_partition(const std::filesystem::path& png_path,
                    const std::filesystem::path& legend_path, const PartitionMap& part);
PartitionMap load_partition(const std::filesystem::path& png_path,
                            const std::filesystem::path& legend_path);

} // namespace matforge
