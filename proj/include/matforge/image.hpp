#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matforge/error.hpp"

namespace matforge {

enum class ChannelRole { Diffuse, Albedo, Normal, Roughness, Metalness, Height, Specular };

const char* role_name(ChannelRole role);
ChannelRole role_from_name(const std::string& name);
int role_channels(ChannelRole role); // 3 for diffuse/albedo/normal, 1 otherwise

// W x H image, row-major, values in [0,1], 1 or 3 interleaved channels.
// Row 0 is the top of the image.
struct TextureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    ChannelRole role = ChannelRole::Diffuse;
    std::vector<float> data;

    TextureMap() = default;
    TextureMap(int w, int h, int c, ChannelRole r, float fill = 0.0f)
        : width(w), height(h), channels(c), role(r), data(size_t(w) * h * c, fill) {}

    float& at(int x, int y, int c = 0) { return data[(size_t(y) * width + x) * channels + c]; }
    float at(int x, int y, int c = 0) const { return data[(size_t(y) * width + x) * channels + c]; }

    size_t pixel_count() const { return size_t(width) * height; }
    bool same_size(const TextureMap& o) const { return width == o.width && height == o.height; }
};

// Wraps a UV coordinate into [0,1] (repeat addressing); values already inside
// are left untouched so seam corners at exactly 1.0 stay put.
float wrap_unit(float v);

// Texel containing a wrapped UV coordinate. v runs bottom-up per OBJ
// convention, rows run top-down, so v is flipped here.
void texel_of_uv(float u, float v, int width, int height, int& tx, int& ty);

// Nearest-texel sample with repeat addressing.
void sample_nearest(const TextureMap& img, float u, float v, float out[3]);

// Bilinear resize with wrap addressing (used to align key material maps with
// the query resolution; tiling survives the wrap).
TextureMap resize_bilinear(const TextureMap& img, int new_width, int new_height);

// --- PNG (backed by zlib; 8/16-bit, gray / RGB / palette; no interlace) ---

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 or 3 after alpha stripping
    int bit_depth = 0;  // 8 or 16
    bool indexed = false;
    std::vector<float> data;          // normalized to [0,1]
    std::vector<uint8_t> indices;     // palette indices when indexed
    std::vector<std::array<uint8_t, 3>> palette;
};

PngImage read_png(const std::filesystem::path& path);
std::vector<uint8_t> encode_png8(const TextureMap& img);
void write_png8(const std::filesystem::path& path, const TextureMap& img);
void write_png16(const std::filesystem::path& path, const TextureMap& img);
void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<uint8_t>& pixels);
void write_png_indexed(const std::filesystem::path& path, int width, int height,
                       const std::vector<uint8_t>& indices,
                       const std::vector<std::array<uint8_t, 3>>& palette);

// --- EXR (uncompressed float32 scanlines, 1 or 3 channels) ---

struct ExrImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;
};

ExrImage read_exr(const std::filesystem::path& path);
void write_exr(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<float>& data);

// --- Spec-facing texture load ---

// Loads a PNG or EXR into a TextureMap with the requested role. Grayscale
// files land in 1 channel; a 1-channel file asked to be diffuse broadcasts to
// 3; any other channel-count conflict with the role is a ChannelMismatch.
TextureMap load_texture(const std::filesystem::path& path, ChannelRole role);

// 8-bit export used everywhere; 16-bit behind the CLI --deep flag.
void save_texture(const std::filesystem::path& path, const TextureMap& img, bool deep16 = false);

} // namespace matforge
