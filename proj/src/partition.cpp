#include "matforge/partition.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace matforge {

int64_t OccupancyGrid::count() const {
    int64_t n = 0;
    for (uint8_t v : occupied) n += v;
    return n;
}

int64_t PartitionMap::count_of(int32_t value) const {
    int64_t n = 0;
    for (int32_t v : material) n += v == value;
    return n;
}

int PartitionMap::legend_index(const std::string& material_id) const {
    for (size_t i = 0; i < legend.size(); ++i)
        if (legend[i] == material_id) return int(i);
    return -1;
}

namespace {

// UV (wrapped, v up) -> continuous texel coordinates (y down)
void uv_to_texel_space(Vec2 uv, int tex_size, float& tx, float& ty) {
    tx = wrap_unit(uv.x) * tex_size;
    ty = (1.0f - wrap_unit(uv.y)) * tex_size;
}

void dilate_within(std::vector<uint8_t>& grid, int size, const OccupancyGrid& occupancy) {
    std::vector<uint8_t> src = grid;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            if (src[size_t(y) * size + x]) continue;
            if (!occupancy.test(x, y)) continue;
            bool touch = false;
            for (int dy = -1; dy <= 1 && !touch; ++dy) {
                for (int dx = -1; dx <= 1 && !touch; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
                    if (src[size_t(ny) * size + nx]) touch = true;
                }
            }
            if (touch) grid[size_t(y) * size + x] = 1;
        }
    }
}

OccupancyGrid rasterize_uv_triangles(const Mesh& mesh, int tex_size) {
    OccupancyGrid grid;
    grid.size = tex_size;
    grid.occupied.assign(size_t(tex_size) * tex_size, 0);
    for (const auto& face : mesh.faces) {
        float tx[3], ty[3];
        for (int k = 0; k < 3; ++k)
            uv_to_texel_space(mesh.uvs[face[k].uv], tex_size, tx[k], ty[k]);
        float min_x = std::min({tx[0], tx[1], tx[2]});
        float max_x = std::max({tx[0], tx[1], tx[2]});
        float min_y = std::min({ty[0], ty[1], ty[2]});
        float max_y = std::max({ty[0], ty[1], ty[2]});
        int x0 = std::max(0, int(std::floor(min_x)));
        int x1 = std::min(tex_size - 1, int(std::ceil(max_x)));
        int y0 = std::max(0, int(std::floor(min_y)));
        int y1 = std::min(tex_size - 1, int(std::ceil(max_y)));
        float area = (tx[1] - tx[0]) * (ty[2] - ty[0]) - (ty[1] - ty[0]) * (tx[2] - tx[0]);
        if (area == 0.0f) continue;
        float inv_area = 1.0f / area;
        for (int y = y0; y <= y1; ++y) {
            float py = y + 0.5f;
            for (int x = x0; x <= x1; ++x) {
                float px = x + 0.5f;
                float b0 = ((tx[2] - tx[1]) * (py - ty[1]) - (ty[2] - ty[1]) * (px - tx[1])) * inv_area;
                float b1 = ((tx[0] - tx[2]) * (py - ty[2]) - (ty[0] - ty[2]) * (px - tx[2])) * inv_area;
                float b2 = ((tx[1] - tx[0]) * (py - ty[0]) - (ty[1] - ty[0]) * (px - tx[0])) * inv_area;
                const float eps = -1e-6f;
                if (b0 >= eps && b1 >= eps && b2 >= eps)
                    grid.occupied[size_t(y) * tex_size + x] = 1;
            }
        }
    }
    return grid;
}

} // namespace

OccupancyGrid build_occupancy_undilated(const Mesh& mesh, int tex_size) {
    if (mesh.uvs.empty()) throw Error(ErrorCode::MissingUVs, "mesh has no UVs");
    return rasterize_uv_triangles(mesh, tex_size);
}

OccupancyGrid build_occupancy(const Mesh& mesh, int tex_size) {
    OccupancyGrid grid = build_occupancy_undilated(mesh, tex_size);
    // close seam cracks: one 8-neighborhood dilation step
    std::vector<uint8_t> src = grid.occupied;
    for (int y = 0; y < tex_size; ++y) {
        for (int x = 0; x < tex_size; ++x) {
            if (src[size_t(y) * tex_size + x]) continue;
            bool touch = false;
            for (int dy = -1; dy <= 1 && !touch; ++dy) {
                for (int dx = -1; dx <= 1 && !touch; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= tex_size || ny >= tex_size) continue;
                    if (src[size_t(ny) * tex_size + nx]) touch = true;
                }
            }
            if (touch) grid.occupied[size_t(y) * tex_size + x] = 1;
        }
    }
    return grid;
}

UVMask backproject_mask(const RegionMask& mask, const GBuffer& gbuffer, int tex_size,
                        const OccupancyGrid& occupancy) {
    UVMask uv_mask;
    uv_mask.tex_size = tex_size;
    uv_mask.view_id = mask.view_id;
    uv_mask.label = mask.label;
    uv_mask.texels.assign(size_t(tex_size) * tex_size, 0);
    uv_mask.depth.assign(size_t(tex_size) * tex_size,
                         std::numeric_limits<float>::infinity());

    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (!mask.test(x, y)) continue;
            size_t pix = gbuffer.index(x, y);
            if (gbuffer.face_id[pix] == kBackgroundFace) continue; // only z-visible surfels
            int txi, tyi;
            texel_of_uv(gbuffer.uv[pix * 2], gbuffer.uv[pix * 2 + 1], tex_size, tex_size, txi, tyi);
            size_t t = size_t(tyi) * tex_size + txi;
            uv_mask.texels[t] = 1;
            uv_mask.depth[t] = std::min(uv_mask.depth[t], gbuffer.depth[pix]);
        }
    }

    // dilation within occupancy; dilated texels inherit the min neighbor depth
    std::vector<uint8_t> src = uv_mask.texels;
    for (int y = 0; y < tex_size; ++y) {
        for (int x = 0; x < tex_size; ++x) {
            size_t t = size_t(y) * tex_size + x;
            if (src[t] || !occupancy.test(x, y)) continue;
            float depth = std::numeric_limits<float>::infinity();
            bool touch = false;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= tex_size || ny >= tex_size) continue;
                    size_t nt = size_t(ny) * tex_size + nx;
                    if (src[nt]) {
                        touch = true;
                        depth = std::min(depth, uv_mask.depth[nt]);
                    }
                }
            }
            if (touch) {
                uv_mask.texels[t] = 1;
                uv_mask.depth[t] = depth;
            }
        }
    }

    uv_mask.texel_count = 0;
    for (uint8_t v : uv_mask.texels) uv_mask.texel_count += v;
    return uv_mask;
}

PartitionMap merge_views(const std::vector<std::pair<UVMask, std::string>>& labeled,
                         const OccupancyGrid& occupancy) {
    int tex_size = occupancy.size;
    PartitionMap part;
    part.tex_size = tex_size;
    part.material.assign(size_t(tex_size) * tex_size, kUnoccupied);

    // stable legend: material ids sorted
    for (const auto& [mask, id] : labeled) {
        if (std::find(part.legend.begin(), part.legend.end(), id) == part.legend.end())
            part.legend.push_back(id);
    }
    std::sort(part.legend.begin(), part.legend.end());

    size_t n = size_t(tex_size) * tex_size;
    size_t n_mats = part.legend.size();
    std::vector<int32_t> votes(n * n_mats, 0);
    std::vector<float> best_depth(n * n_mats, std::numeric_limits<float>::infinity());

    for (const auto& [mask, id] : labeled) {
        int li = part.legend_index(id);
        for (size_t t = 0; t < n; ++t) {
            if (!mask.texels[t]) continue;
            ++votes[t * n_mats + li];
            best_depth[t * n_mats + li] = std::min(best_depth[t * n_mats + li], mask.depth[t]);
        }
    }

    for (int y = 0; y < tex_size; ++y) {
        for (int x = 0; x < tex_size; ++x) {
            size_t t = size_t(y) * tex_size + x;
            if (!occupancy.test(x, y)) continue;
            part.material[t] = kUnassigned;
            int32_t max_votes = 0;
            for (size_t m = 0; m < n_mats; ++m) max_votes = std::max(max_votes, votes[t * n_mats + m]);
            if (max_votes == 0) continue;
            int winner = -1;
            float winner_depth = std::numeric_limits<float>::infinity();
            for (size_t m = 0; m < n_mats; ++m) {
                if (votes[t * n_mats + m] != max_votes) continue;
                if (winner < 0 || best_depth[t * n_mats + m] < winner_depth) {
                    winner = int(m);
                    winner_depth = best_depth[t * n_mats + m];
                }
            }
            part.material[t] = winner;
        }
    }
    return part;
}

PartitionMap refine_missing(PartitionMap part, const TextureMap& diffuse,
                            const OccupancyGrid& occupancy) {
    int tex_size = part.tex_size;
    if (diffuse.width != tex_size || diffuse.height != tex_size)
        throw Error(ErrorCode::ResolutionMismatch, "diffuse does not match partition resolution");

    size_t n_mats = part.legend.size();
    std::vector<double> sums(n_mats * 3, 0.0);
    std::vector<int64_t> counts(n_mats, 0);
    for (int y = 0; y < tex_size; ++y) {
        for (int x = 0; x < tex_size; ++x) {
            int32_t m = part.at(x, y);
            if (m < 0) continue;
            ++counts[m];
            for (int c = 0; c < 3; ++c)
                sums[size_t(m) * 3 + c] += diffuse.at(x, y, std::min(c, diffuse.channels - 1));
        }
    }
    bool any_assigned = false;
    for (int64_t c : counts) any_assigned |= c > 0;
    if (!any_assigned) throw Error(ErrorCode::NoAssignedRegions, "nothing assigned before refine");

    std::vector<float> means(n_mats * 3, 0.0f);
    for (size_t m = 0; m < n_mats; ++m)
        for (int c = 0; c < 3; ++c)
            means[m * 3 + c] = counts[m] ? float(sums[m * 3 + c] / counts[m]) : 0.0f;

    for (int y = 0; y < tex_size; ++y) {
        for (int x = 0; x < tex_size; ++x) {
            size_t t = size_t(y) * tex_size + x;
            if (part.material[t] != kUnassigned) continue;
            if (!occupancy.test(x, y)) { // stale sentinel, normalize
                part.material[t] = kUnoccupied;
                continue;
            }
            float rgb[3];
            for (int c = 0; c < 3; ++c) rgb[c] = diffuse.at(x, y, std::min(c, diffuse.channels - 1));
            int best = -1;
            float best_d = 0.0f;
            for (size_t m = 0; m < n_mats; ++m) {
                if (!counts[m]) continue; // only materials with assigned texels vote
                float d = 0.0f;
                for (int c = 0; c < 3; ++c)
                    d += (rgb[c] - means[m * 3 + c]) * (rgb[c] - means[m * 3 + c]);
                // legend is id-sorted, so strict less keeps the smallest id on ties
                if (best < 0 || d < best_d) {
                    best = int(m);
                    best_d = d;
                }
            }
            part.material[t] = best;
        }
    }
    return part;
}

// ---------------------------------------------------------------------------
// Partition serialization
// ---------------------------------------------------------------------------

namespace {

std::array<uint8_t, 3> legend_color(size_t index) {
    // golden-ratio hue walk, same palette every run
    float h = std::fmod(0.61803398875f * float(index), 1.0f) * 6.0f;
    float x = 1.0f - std::fabs(std::fmod(h, 2.0f) - 1.0f);
    float r = 0, g = 0, b = 0;
    switch (int(h)) {
        case 0: r = 1; g = x; break;
        case 1: r = x; g = 1; break;
        case 2: g = 1; b = x; break;
        case 3: g = x; b = 1; break;
        case 4: r = x; b = 1; break;
        default: r = 1; b = x; break;
    }
    return {uint8_t(55 + 200 * r), uint8_t(55 + 200 * g), uint8_t(55 + 200 * b)};
}

} // namespace

void save_partition(const std::filesystem::path& png_path,
                    const std::filesystem::path& legend_path, const PartitionMap& part) {
    if (part.legend.size() > 253)
        throw Error(ErrorCode::IoFailure, "partition palette overflow (>253 materials)");
    std::vector<std::array<uint8_t, 3>> palette;
    palette.push_back({0, 0, 0});       // 0: unoccupied
    palette.push_back({255, 0, 255});   // 1: unassigned
    for (size_t i = 0; i < part.legend.size(); ++i) palette.push_back(legend_color(i));

    std::vector<uint8_t> indices(part.material.size());
    for (size_t i = 0; i < part.material.size(); ++i) {
        int32_t m = part.material[i];
        indices[i] = m == kUnoccupied ? 0 : m == kUnassigned ? 1 : uint8_t(m + 2);
    }
    write_png_indexed(png_path, part.tex_size, part.tex_size, indices, palette);

    nlohmann::json legend;
    legend["tex_size"] = part.tex_size;
    legend["materials"] = part.legend;
    if (legend_path.has_parent_path()) std::filesystem::create_directories(legend_path.parent_path());
    std::ofstream out(legend_path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + legend_path.string());
    out << legend.dump(2) << "\n";
}

PartitionMap load_partition(const std::filesystem::path& png_path,
                            const std::filesystem::path& legend_path) {
    std::ifstream in(legend_path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + legend_path.string());
    nlohmann::json legend = nlohmann::json::parse(in, nullptr, false);
    if (legend.is_discarded())
        throw Error(ErrorCode::MalformedRecord, legend_path.string() + " is not valid JSON");

    PngImage png = read_png(png_path);
    if (!png.indexed)
        throw Error(ErrorCode::UnsupportedFormat, png_path.string() + " is not an indexed PNG");

    PartitionMap part;
    part.tex_size = png.width;
    if (png.width != png.height)
        throw Error(ErrorCode::UnsupportedFormat, "partition PNG must be square");
    part.legend = legend.value("materials", std::vector<std::string>{});
    part.material.resize(png.indices.size());
    for (size_t i = 0; i < png.indices.size(); ++i) {
        uint8_t idx = png.indices[i];
        part.material[i] = idx == 0 ? kUnoccupied
                         : idx == 1 ? kUnassigned
                                    : int32_t(idx) - 2;
        if (part.material[i] >= int32_t(part.legend.size()))
            throw Error(ErrorCode::MalformedRecord, "partition index outside legend");
    }
    return part;
}

} // namespace matforge
