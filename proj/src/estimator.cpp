#include "matforge/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_map>

#include "matforge/kernels.hpp"

namespace matforge {

// ---------------------------------------------------------------------------
// Histogram equalization
// ---------------------------------------------------------------------------

std::pair<TextureMap, EqualizeLut> hist_equalize(const TextureMap& img) {
    TextureMap out = img;
    EqualizeLut lut;
    lut.channels.resize(img.channels);

    size_t n = img.pixel_count();
    for (int c = 0; c < img.channels; ++c) {
        int64_t hist[256] = {0};
        for (size_t i = 0; i < n; ++i) {
            int bin = int(std::lround(std::clamp(img.data[i * img.channels + c], 0.0f, 1.0f) * 255.0f));
            ++hist[bin];
        }
        int64_t cdf[256];
        int64_t acc = 0;
        for (int bin = 0; bin < 256; ++bin) {
            acc += hist[bin];
            cdf[bin] = acc;
        }
        int64_t cdf_min = 0;
        for (int bin = 0; bin < 256; ++bin) {
            if (cdf[bin] > 0) {
                cdf_min = cdf[bin];
                break;
            }
        }
        auto& table = lut.channels[c];
        if (int64_t(n) <= cdf_min) {
            // constant channel: identity
            for (int bin = 0; bin < 256; ++bin) table[bin] = bin / 255.0f;
        } else {
            double denom = double(int64_t(n) - cdf_min);
            for (int bin = 0; bin < 256; ++bin)
                table[bin] = float(double(cdf[bin] - cdf_min) / denom);
        }
        for (size_t i = 0; i < n; ++i) {
            float v = std::clamp(img.data[i * img.channels + c], 0.0f, 1.0f);
            out.data[i * img.channels + c] = table[int(std::lround(v * 255.0f))];
        }
    }
    return {std::move(out), std::move(lut)};
}

// ---------------------------------------------------------------------------
// PixelIndex
// ---------------------------------------------------------------------------

namespace {

// pack three float bit patterns for exact dedup
struct TripleKey {
    uint32_t a, b, c;
    bool operator==(const TripleKey&) const = default;
};

struct TripleHash {
    size_t operator()(const TripleKey& k) const {
        uint64_t h = 1469598103934665603ull;
        for (uint32_t v : {k.a, k.b, k.c}) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return size_t(h);
    }
};

uint32_t float_bits(float f) {
    uint32_t b;
    std::memcpy(&b, &f, 4);
    return b;
}

} // namespace

PixelIndex::PixelIndex(const TextureMap& key_diffuse, int leaf_size) : leaf_size_(leaf_size) {
    if (key_diffuse.channels != 3)
        throw Error(ErrorCode::ChannelMismatch, "pixel index needs a 3-channel key diffuse");
    size_t n = key_diffuse.pixel_count();

    // Duplicate triples collapse to their smallest pixel index: the distance
    // set is unchanged and the tie rule picks that index anyway.
    std::unordered_map<TripleKey, int32_t, TripleHash> unique;
    unique.reserve(n * 2);
    for (size_t i = 0; i < n; ++i) {
        TripleKey key{float_bits(key_diffuse.data[i * 3]), float_bits(key_diffuse.data[i * 3 + 1]),
                      float_bits(key_diffuse.data[i * 3 + 2])};
        auto [it, inserted] = unique.try_emplace(key, int32_t(i));
        if (!inserted && int32_t(i) < it->second) it->second = int32_t(i);
    }

    r_.reserve(unique.size());
    g_.reserve(unique.size());
    b_.reserve(unique.size());
    index_.reserve(unique.size());
    for (const auto& [key, idx] : unique) index_.push_back(idx);
    // hash order is not deterministic across platforms; index order is
    std::sort(index_.begin(), index_.end());
    for (int32_t idx : index_) {
        r_.push_back(key_diffuse.data[size_t(idx) * 3]);
        g_.push_back(key_diffuse.data[size_t(idx) * 3 + 1]);
        b_.push_back(key_diffuse.data[size_t(idx) * 3 + 2]);
    }

    nodes_.reserve(2 * unique.size() / size_t(std::max(leaf_size_, 1)) + 8);
    scratch_pos_.resize(r_.size());
    scratch_f_.resize(r_.size());
    scratch_i_.resize(r_.size());
    root_ = build(0, int(r_.size()));
    scratch_pos_ = {};
    scratch_f_ = {};
    scratch_i_ = {};
}

int PixelIndex::build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;

    int count = end - begin;
    if (count > leaf_size_) {
        float lo[3], hi[3];
        kernels::minmax3(r_.data() + begin, g_.data() + begin, b_.data() + begin, count, lo, hi);
        int axis = 0;
        float spread = hi[0] - lo[0];
        for (int c = 1; c < 3; ++c) {
            if (hi[c] - lo[c] > spread) {
                spread = hi[c] - lo[c];
                axis = c;
            }
        }
        if (spread > 0.0f) {
            int mid = begin + count / 2;
            const float* axis_data = axis == 0 ? r_.data() : axis == 1 ? g_.data() : b_.data();
            int* pos = scratch_pos_.data();
            for (int i = 0; i < count; ++i) pos[i] = begin + i;
            std::nth_element(pos, pos + (mid - begin), pos + count,
                             [&](int a, int b) { return axis_data[a] < axis_data[b]; });
            // apply the permutation to all four parallel arrays
            auto permute_f = [&](std::vector<float>& arr) {
                for (int i = 0; i < count; ++i) scratch_f_[i] = arr[pos[i]];
                std::copy(scratch_f_.begin(), scratch_f_.begin() + count, arr.begin() + begin);
            };
            permute_f(r_);
            permute_f(g_);
            permute_f(b_);
            for (int i = 0; i < count; ++i) scratch_i_[i] = index_[pos[i]];
            std::copy(scratch_i_.begin(), scratch_i_.begin() + count, index_.begin() + begin);

            node.axis = axis;
            node.split = axis == 0 ? r_[mid] : axis == 1 ? g_[mid] : b_[mid];
            int self = int(nodes_.size());
            nodes_.push_back(node);
            int left = build(begin, mid);
            int right = build(mid, end);
            nodes_[self].left = left;
            nodes_[self].right = right;
            return self;
        }
        // zero spread on every axis: all points identical, keep as a leaf
    }
    int self = int(nodes_.size());
    nodes_.push_back(node);
    return self;
}

void PixelIndex::query(int node_id, float q[3], Best& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        kernels::NnHit hit = kernels::nn_argmin3(r_.data() + node.begin, g_.data() + node.begin,
                                                 b_.data() + node.begin, index_.data() + node.begin,
                                                 node.end - node.begin, q[0], q[1], q[2]);
        if (hit.index >= 0 &&
            (hit.dist2 < best.dist2 || (hit.dist2 == best.dist2 && hit.index < best.index)))
            best = {hit.dist2, hit.index};
        return;
    }
    float delta = q[node.axis] - node.split;
    int near = delta < 0.0f ? node.left : node.right;
    int far = delta < 0.0f ? node.right : node.left;
    query(near, q, best);
    // equal axial distance can still hide an equal-distance smaller index
    if (delta * delta <= best.dist2) query(far, q, best);
}

int PixelIndex::nearest(float r, float g, float b) const {
    Best best{std::numeric_limits<float>::infinity(), std::numeric_limits<int32_t>::max()};
    float q[3] = {r, g, b};
    query(root_, q, best);
    return best.index;
}

// ---------------------------------------------------------------------------
// Transfer
// ---------------------------------------------------------------------------

float role_default_value(ChannelRole role, int channel) {
    switch (role) {
        case ChannelRole::Normal: return channel == 2 ? 1.0f : 0.5f;
        case ChannelRole::Roughness: return 0.5f;
        case ChannelRole::Metalness: return 0.0f;
        case ChannelRole::Height: return 0.5f;
        case ChannelRole::Specular: return 0.5f;
        default: return 0.0f;
    }
}

static const ChannelRole kTargetRoles[5] = {ChannelRole::Normal, ChannelRole::Roughness,
                                            ChannelRole::Metalness, ChannelRole::Height,
                                            ChannelRole::Specular};

void transfer_region(const TextureMap& query_eq, const std::vector<int64_t>& region_texels,
                     const MaterialRecord& material, const PixelIndex& index, SVBRDFSet& out) {
    int out_w = out.maps.begin()->second.width;
    int out_h = out.maps.begin()->second.height;
    std::map<ChannelRole, TextureMap> key_maps;
    for (ChannelRole role : kTargetRoles) {
        auto it = material.maps.find(role);
        if (it != material.maps.end())
            key_maps.emplace(role, resize_bilinear(it->second, out_w, out_h));
    }
    for (int64_t t : region_texels) {
        float q[3] = {query_eq.data[size_t(t) * 3], query_eq.data[size_t(t) * 3 + 1],
                      query_eq.data[size_t(t) * 3 + 2]};
        int nn = index.nearest(q[0], q[1], q[2]);
        for (ChannelRole role : kTargetRoles) {
            TextureMap& dst = out.maps.at(role);
            auto key_it = key_maps.find(role);
            for (int c = 0; c < dst.channels; ++c) {
                float v = key_it != key_maps.end()
                              ? key_it->second.data[size_t(nn) * key_it->second.channels + c]
                              : role_default_value(role, c);
                dst.data[size_t(t) * dst.channels + c] = v;
            }
        }
    }
}

SVBRDFSet estimate(const TextureMap& diffuse, const PartitionMap& part, const LibraryIndex& lib) {
    if (diffuse.width != part.tex_size || diffuse.height != part.tex_size)
        throw Error(ErrorCode::ResolutionMismatch, "diffuse does not match partition resolution");
    if (part.count_of(kUnassigned) > 0)
        throw Error(ErrorCode::UnassignedTexels,
                    std::to_string(part.count_of(kUnassigned)) + " texels still unassigned");
    for (const std::string& id : part.legend) {
        if (!lib.has(id)) throw Error(ErrorCode::MaterialMissing, id);
    }

    SVBRDFSet out;
    out.provenance = part;
    for (ChannelRole role : kTargetRoles) {
        TextureMap map(part.tex_size, part.tex_size, role_channels(role), role);
        for (int y = 0; y < part.tex_size; ++y)
            for (int x = 0; x < part.tex_size; ++x)
                for (int c = 0; c < map.channels; ++c)
                    map.at(x, y, c) = role_default_value(role, c);
        out.maps.emplace(role, std::move(map));
    }

    auto [query_eq, query_lut] = hist_equalize(diffuse);

    // gather texels per material
    std::vector<std::vector<int64_t>> regions(part.legend.size());
    for (size_t t = 0; t < part.material.size(); ++t) {
        int32_t m = part.material[t];
        if (m >= 0) regions[m].push_back(int64_t(t));
    }

    for (size_t m = 0; m < part.legend.size(); ++m) {
        if (regions[m].empty()) continue;
        const MaterialRecord& material = lib.record(part.legend[m]);

        // key index space aligned with the query resolution; one NN index is
        // then valid across every role
        TextureMap key_resized =
            resize_bilinear(material.key_diffuse(), part.tex_size, part.tex_size);
        auto [key_eq, key_lut] = hist_equalize(key_resized);
        PixelIndex index(key_eq);

        transfer_region(query_eq, regions[m], material, index, out);
    }
    return out;
}

} // namespace matforge
