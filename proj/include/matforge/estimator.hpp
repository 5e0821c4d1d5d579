#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "matforge/image.hpp"
#include "matforge/library.hpp"
#include "matforge/partition.hpp"

namespace matforge {

struct EqualizeLut {
    // one 256-entry table per channel
    std::vector<std::array<float, 256>> channels;
};

// Classical discrete per-channel equalization: v -> (cdf(v) - cdf_min) /
// (N - cdf_min), identity on a degenerate CDF. Monotone by construction.
std::pair<TextureMap, EqualizeLut> hist_equalize(const TextureMap& img);

// KD-tree over the key diffuse's RGB triples. Max-spread split axis, leaf
// scans through the runtime-dispatched kernels, exact nearest neighbor with
// smallest-linear-index tie-break.
class PixelIndex {
public:
    explicit PixelIndex(const TextureMap& key_diffuse, int leaf_size = 16);

    // linear pixel index into the key image of the nearest RGB triple
    int nearest(float r, float g, float b) const;

    int leaf_size() const { return leaf_size_; }
    size_t point_count() const { return r_.size(); }

private:
    struct Node {
        float split = 0.0f;
        int axis = -1;      // -1 marks a leaf
        int begin = 0, end = 0;
        int left = -1, right = -1;
    };

    struct Best {
        float dist2;
        int32_t index;
    };

    int build(int begin, int end);
    void query(int node, float q[3], Best& best) const;

    int leaf_size_;
    std::vector<float> r_, g_, b_;   // SoA, permuted to tree order
    std::vector<int32_t> index_;     // original linear pixel indices
    std::vector<Node> nodes_;
    int root_ = -1;
    // build-time scratch, released after construction
    std::vector<int> scratch_pos_;
    std::vector<float> scratch_f_;
    std::vector<int32_t> scratch_i_;
};

struct SVBRDFSet {
    std::map<ChannelRole, TextureMap> maps; // normal/roughness/metalness/height/specular
    PartitionMap provenance;
};

// Neutral values used for missing material maps and unoccupied texels.
float role_default_value(ChannelRole role, int channel);

// Per-texel transfer: NN index into the equalized key diffuse, then that
// pixel read from every target map of the material (resampled to the output
// resolution so one index addresses every role). Pure index transfer, no
// interpolation. Roles the material lacks keep their neutral defaults.
void transfer_region(const TextureMap& query_eq, const std::vector<int64_t>& region_texels,
                     const MaterialRecord& material, const PixelIndex& index, SVBRDFSet& out);

SVBRDFSet estimate(const TextureMap& diffuse, const PartitionMap& part, const LibraryIndex& lib);

} // namespace matforge
