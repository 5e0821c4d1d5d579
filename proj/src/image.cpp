#include "matforge/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace matforge {

const char* role_name(ChannelRole role) {
    switch (role) {
        case ChannelRole::Diffuse: return "diffuse";
        case ChannelRole::Albedo: return "albedo";
        case ChannelRole::Normal: return "normal";
        case ChannelRole::Roughness: return "roughness";
        case ChannelRole::Metalness: return "metalness";
        case ChannelRole::Height: return "height";
        case ChannelRole::Specular: return "specular";
    }
    return "diffuse";
}

ChannelRole role_from_name(const std::string& name) {
    if (name == "diffuse") return ChannelRole::Diffuse;
    if (name == "albedo" || name == "basecolor") return ChannelRole::Albedo;
    if (name == "normal") return ChannelRole::Normal;
    if (name == "roughness") return ChannelRole::Roughness;
    if (name == "metalness" || name == "metallic") return ChannelRole::Metalness;
    if (name == "height" || name == "displacement") return ChannelRole::Height;
    if (name == "specular") return ChannelRole::Specular;
    throw Error(ErrorCode::UnsupportedFormat, "unknown channel role '" + name + "'");
}

int role_channels(ChannelRole role) {
    switch (role) {
        case ChannelRole::Diffuse:
        case ChannelRole::Albedo:
        case ChannelRole::Normal: return 3;
        default: return 1;
    }
}

float wrap_unit(float v) {
    if (v >= 0.0f && v <= 1.0f) return v;
    float w = v - std::floor(v);
    return w;
}

void texel_of_uv(float u, float v, int width, int height, int& tx, int& ty) {
    float wu = wrap_unit(u);
    float wv = wrap_unit(v);
    tx = std::min(int(wu * width), width - 1);
    ty = std::min(int((1.0f - wv) * height), height - 1);
    if (tx < 0) tx = 0;
    if (ty < 0) ty = 0;
}

void sample_nearest(const TextureMap& img, float u, float v, float out[3]) {
    int tx, ty;
    texel_of_uv(u, v, img.width, img.height, tx, ty);
    for (int c = 0; c < 3; ++c) out[c] = img.at(tx, ty, std::min(c, img.channels - 1));
}

TextureMap resize_bilinear(const TextureMap& img, int new_width, int new_height) {
    if (img.width == new_width && img.height == new_height) return img;
    TextureMap out(new_width, new_height, img.channels, img.role);
    auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
    for (int y = 0; y < new_height; ++y) {
        float sy = (y + 0.5f) * img.height / new_height - 0.5f;
        int y0 = int(std::floor(sy));
        float fy = sy - y0;
        int ya = wrap(y0, img.height), yb = wrap(y0 + 1, img.height);
        for (int x = 0; x < new_width; ++x) {
            float sx = (x + 0.5f) * img.width / new_width - 0.5f;
            int x0 = int(std::floor(sx));
            float fx = sx - x0;
            int xa = wrap(x0, img.width), xb = wrap(x0 + 1, img.width);
            for (int c = 0; c < img.channels; ++c) {
                float v00 = img.at(xa, ya, c), v10 = img.at(xb, ya, c);
                float v01 = img.at(xa, yb, c), v11 = img.at(xb, yb, c);
                out.at(x, y, c) = (v00 * (1 - fx) + v10 * fx) * (1 - fy) +
                                  (v01 * (1 - fx) + v11 * fx) * fy;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

namespace {

const uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

uint32_t read_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> bytes(static_cast<size_t>(len), 0);
    if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

std::vector<uint8_t> zlib_deflate(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw Error(ErrorCode::IoFailure, "deflate failed");
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_inflate(const std::vector<uint8_t>& comp, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf len = uLongf(expected);
    int rc = uncompress(out.data(), &len, comp.data(), uLong(comp.size()));
    if (rc != Z_OK || len != expected)
        throw Error(ErrorCode::UnsupportedFormat, "corrupt PNG stream");
    return out;
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_be32(out, uint32_t(payload.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uLong crc = crc32(0, out.data() + crc_start, uInt(out.size() - crc_start));
    put_be32(out, uint32_t(crc));
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

void unfilter_rows(std::vector<uint8_t>& raw, int height, size_t stride, int bpp) {
    std::vector<uint8_t> prev(stride, 0);
    for (int y = 0; y < height; ++y) {
        uint8_t* row = raw.data() + size_t(y) * (stride + 1);
        int filter = row[0];
        uint8_t* cur = row + 1;
        switch (filter) {
            case 0: break;
            case 1:
                for (size_t i = bpp; i < stride; ++i) cur[i] = uint8_t(cur[i] + cur[i - bpp]);
                break;
            case 2:
                for (size_t i = 0; i < stride; ++i) cur[i] = uint8_t(cur[i] + prev[i]);
                break;
            case 3:
                for (size_t i = 0; i < stride; ++i) {
                    int left = i >= size_t(bpp) ? cur[i - bpp] : 0;
                    cur[i] = uint8_t(cur[i] + (left + prev[i]) / 2);
                }
                break;
            case 4:
                for (size_t i = 0; i < stride; ++i) {
                    int left = i >= size_t(bpp) ? cur[i - bpp] : 0;
                    int upleft = i >= size_t(bpp) ? prev[i - bpp] : 0;
                    cur[i] = uint8_t(cur[i] + paeth(left, prev[i], upleft));
                }
                break;
            default: throw Error(ErrorCode::UnsupportedFormat, "bad PNG filter type");
        }
        std::memcpy(prev.data(), cur, stride);
    }
}

std::vector<uint8_t> encode_png(int width, int height, int channels, int bit_depth,
                                int color_type, const std::vector<uint8_t>& samples,
                                const std::vector<std::array<uint8_t, 3>>* palette) {
    size_t stride = size_t(width) * channels * (bit_depth / 8);
    std::vector<uint8_t> raw;
    raw.reserve((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), samples.begin() + size_t(y) * stride,
                   samples.begin() + size_t(y + 1) * stride);
    }
    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    std::vector<uint8_t> ihdr;
    put_be32(ihdr, uint32_t(width));
    put_be32(ihdr, uint32_t(height));
    ihdr.push_back(uint8_t(bit_depth));
    ihdr.push_back(uint8_t(color_type));
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace
    append_chunk(out, "IHDR", ihdr);
    if (palette) {
        std::vector<uint8_t> plte;
        for (const auto& rgb : *palette) plte.insert(plte.end(), rgb.begin(), rgb.end());
        append_chunk(out, "PLTE", plte);
    }
    append_chunk(out, "IDAT", zlib_deflate(raw));
    append_chunk(out, "IEND", {});
    return out;
}

std::vector<uint8_t> quantize8(const TextureMap& img) {
    std::vector<uint8_t> samples(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        samples[i] = uint8_t(std::lround(v * 255.0f));
    }
    return samples;
}

} // namespace

PngImage read_png(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
        throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a PNG file");

    int width = 0, height = 0, bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    std::vector<std::array<uint8_t, 3>> palette;
    size_t pos = 8;
    bool saw_ihdr = false;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = read_be32(bytes.data() + pos);
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        if (pos + 12 + len > bytes.size())
            throw Error(ErrorCode::UnsupportedFormat, "truncated PNG chunk in " + path.string());
        const uint8_t* payload = bytes.data() + pos + 8;
        if (type == "IHDR") {
            width = int(read_be32(payload));
            height = int(read_be32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0)
                throw Error(ErrorCode::UnsupportedFormat, "interlaced PNG not supported");
            saw_ihdr = true;
        } else if (type == "PLTE") {
            for (uint32_t i = 0; i + 2 < len; i += 3)
                palette.push_back({payload[i], payload[i + 1], payload[i + 2]});
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || width <= 0 || height <= 0)
        throw Error(ErrorCode::UnsupportedFormat, "missing PNG header in " + path.string());
    if (bit_depth != 8 && bit_depth != 16)
        throw Error(ErrorCode::UnsupportedFormat, "only 8/16-bit PNG supported");

    int src_channels;
    switch (color_type) {
        case 0: src_channels = 1; break; // gray
        case 2: src_channels = 3; break; // rgb
        case 3: src_channels = 1; break; // palette indices
        case 4: src_channels = 2; break; // gray + alpha
        case 6: src_channels = 4; break; // rgba
        default: throw Error(ErrorCode::UnsupportedFormat, "unsupported PNG color type");
    }
    if (color_type == 3 && bit_depth != 8)
        throw Error(ErrorCode::UnsupportedFormat, "only 8-bit palette PNG supported");

    int bytes_per_sample = bit_depth / 8;
    size_t stride = size_t(width) * src_channels * bytes_per_sample;
    std::vector<uint8_t> raw = zlib_inflate(idat, (stride + 1) * height);
    unfilter_rows(raw, height, stride, src_channels * bytes_per_sample);

    PngImage img;
    img.width = width;
    img.height = height;
    img.bit_depth = bit_depth;
    float scale = bit_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;

    auto sample_at = [&](int y, size_t i) -> float {
        const uint8_t* row = raw.data() + size_t(y) * (stride + 1) + 1;
        if (bit_depth == 8) return row[i] * scale;
        return ((uint32_t(row[i * 2]) << 8) | row[i * 2 + 1]) * scale;
    };

    if (color_type == 3) {
        if (palette.empty())
            throw Error(ErrorCode::UnsupportedFormat, "palette PNG without PLTE");
        img.indexed = true;
        img.palette = palette;
        img.channels = 3;
        img.indices.resize(size_t(width) * height);
        img.data.resize(size_t(width) * height * 3);
        for (int y = 0; y < height; ++y) {
            const uint8_t* row = raw.data() + size_t(y) * (stride + 1) + 1;
            for (int x = 0; x < width; ++x) {
                uint8_t idx = row[x];
                img.indices[size_t(y) * width + x] = idx;
                const auto& rgb = palette[std::min<size_t>(idx, palette.size() - 1)];
                for (int c = 0; c < 3; ++c)
                    img.data[(size_t(y) * width + x) * 3 + c] = rgb[c] / 255.0f;
            }
        }
        return img;
    }

    // Alpha channels are stripped on load.
    img.channels = (src_channels >= 3) ? 3 : 1;
    img.data.resize(size_t(width) * height * img.channels);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                img.data[(size_t(y) * width + x) * img.channels + c] =
                    sample_at(y, size_t(x) * src_channels + c);
            }
        }
    }
    return img;
}

std::vector<uint8_t> encode_png8(const TextureMap& img) {
    return encode_png(img.width, img.height, img.channels, 8, img.channels == 3 ? 2 : 0,
                      quantize8(img), nullptr);
}

void write_png8(const std::filesystem::path& path, const TextureMap& img) {
    write_file_bytes(path, encode_png8(img));
}

void write_png16(const std::filesystem::path& path, const TextureMap& img) {
    std::vector<uint8_t> samples(img.data.size() * 2);
    for (size_t i = 0; i < img.data.size(); ++i) {
        float v = std::clamp(img.data[i], 0.0f, 1.0f);
        uint16_t q = uint16_t(std::lround(v * 65535.0f));
        samples[i * 2] = uint8_t(q >> 8);
        samples[i * 2 + 1] = uint8_t(q);
    }
    write_file_bytes(path, encode_png(img.width, img.height, img.channels, 16,
                                      img.channels == 3 ? 2 : 0, samples, nullptr));
}

void write_png_gray8(const std::filesystem::path& path, int width, int height,
                     const std::vector<uint8_t>& pixels) {
    write_file_bytes(path, encode_png(width, height, 1, 8, 0, pixels, nullptr));
}

void write_png_indexed(const std::filesystem::path& path, int width, int height,
                       const std::vector<uint8_t>& indices,
                       const std::vector<std::array<uint8_t, 3>>& palette) {
    write_file_bytes(path, encode_png(width, height, 1, 8, 3, indices, &palette));
}

// ---------------------------------------------------------------------------
// EXR (uncompressed float scanlines)
// ---------------------------------------------------------------------------

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

void put_str(std::vector<uint8_t>& out, const char* s) {
    out.insert(out.end(), s, s + std::strlen(s) + 1);
}

void put_attr(std::vector<uint8_t>& out, const char* name, const char* type,
              const std::vector<uint8_t>& value) {
    put_str(out, name);
    put_str(out, type);
    put_u32(out, uint32_t(value.size()));
    out.insert(out.end(), value.begin(), value.end());
}

struct ExrReader {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    uint8_t u8() {
        if (pos >= bytes.size()) throw Error(ErrorCode::UnsupportedFormat, "truncated EXR");
        return bytes[pos++];
    }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(u8()) << (8 * i);
        return v;
    }
    int32_t i32() { return int32_t(u32()); }
    float f32() {
        uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
    std::string str() {
        std::string s;
        for (uint8_t c = u8(); c != 0; c = u8()) s.push_back(char(c));
        return s;
    }
    void skip(size_t n) {
        if (pos + n > bytes.size()) throw Error(ErrorCode::UnsupportedFormat, "truncated EXR");
        pos += n;
    }
};

} // namespace

void write_exr(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<float>& data) {
    if (channels != 1 && channels != 3)
        throw Error(ErrorCode::UnsupportedFormat, "EXR writer supports 1 or 3 channels");
    std::vector<uint8_t> out;
    put_u32(out, 20000630); // magic
    put_u32(out, 2);        // version, scanline

    // Channel list, alphabetical as required: B,G,R or Y.
    std::vector<const char*> names = channels == 3
        ? std::vector<const char*>{"B", "G", "R"}
        : std::vector<const char*>{"Y"};
    std::vector<uint8_t> chlist;
    for (const char* n : names) {
        put_str(chlist, n);
        put_u32(chlist, 2); // FLOAT
        put_u32(chlist, 0); // pLinear + reserved
        put_u32(chlist, 1); // xSampling
        put_u32(chlist, 1); // ySampling
    }
    chlist.push_back(0);
    put_attr(out, "channels", "chlist", chlist);

    std::vector<uint8_t> comp{0}; // NO_COMPRESSION
    put_attr(out, "compression", "compression", comp);

    std::vector<uint8_t> box;
    put_u32(box, 0);
    put_u32(box, 0);
    put_u32(box, uint32_t(width - 1));
    put_u32(box, uint32_t(height - 1));
    put_attr(out, "dataWindow", "box2i", box);
    put_attr(out, "displayWindow", "box2i", box);

    std::vector<uint8_t> lo{0}; // INCREASING_Y
    put_attr(out, "lineOrder", "lineOrder", lo);

    std::vector<uint8_t> par;
    put_f32(par, 1.0f);
    put_attr(out, "pixelAspectRatio", "float", par);

    std::vector<uint8_t> swc;
    put_f32(swc, 0.0f);
    put_f32(swc, 0.0f);
    put_attr(out, "screenWindowCenter", "v2f", swc);

    std::vector<uint8_t> sww;
    put_f32(sww, 1.0f);
    put_attr(out, "screenWindowWidth", "float", sww);

    out.push_back(0); // end of header

    size_t table_pos = out.size();
    for (int y = 0; y < height; ++y) put_u64(out, 0); // offset table placeholder

    std::vector<uint64_t> offsets(height);
    size_t row_bytes = size_t(width) * channels * 4;
    for (int y = 0; y < height; ++y) {
        offsets[y] = out.size();
        put_u32(out, uint32_t(y));
        put_u32(out, uint32_t(row_bytes));
        // channels stored planar per scanline, alphabetical order
        for (int c = 0; c < channels; ++c) {
            int src_c = channels == 3 ? (c == 0 ? 2 : c == 1 ? 1 : 0) : 0; // B,G,R <- rgb
            for (int x = 0; x < width; ++x)
                put_f32(out, data[(size_t(y) * width + x) * channels + src_c]);
        }
    }
    for (int y = 0; y < height; ++y) {
        uint64_t off = offsets[y];
        for (int i = 0; i < 8; ++i) out[table_pos + size_t(y) * 8 + i] = uint8_t(off >> (8 * i));
    }
    write_file_bytes(path, out);
}

ExrImage read_exr(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    ExrReader r{bytes};
    if (r.u32() != 20000630)
        throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not an EXR file");
    uint32_t version = r.u32();
    if ((version & 0x200) != 0)
        throw Error(ErrorCode::UnsupportedFormat, "tiled EXR not supported");

    std::vector<std::string> channel_names;
    int compression = -1;
    int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
    bool have_window = false;

    while (true) {
        std::string name = r.str();
        if (name.empty()) break;
        std::string type = r.str();
        uint32_t size = r.u32();
        size_t end = r.pos + size;
        if (name == "channels" && type == "chlist") {
            while (r.pos < end) {
                if (bytes[r.pos] == 0) {
                    r.skip(1);
                    break;
                }
                std::string ch = r.str();
                uint32_t pixel_type = r.u32();
                r.skip(4 + 4 + 4); // pLinear/reserved, xSampling, ySampling
                if (pixel_type != 2)
                    throw Error(ErrorCode::UnsupportedFormat, "only FLOAT EXR channels supported");
                channel_names.push_back(ch);
            }
        } else if (name == "compression") {
            compression = r.u8();
        } else if (name == "dataWindow") {
            x_min = r.i32();
            y_min = r.i32();
            x_max = r.i32();
            y_max = r.i32();
            have_window = true;
        } else {
            r.skip(size);
        }
        r.pos = end;
    }
    if (compression != 0)
        throw Error(ErrorCode::UnsupportedFormat, "compressed EXR not supported");
    if (!have_window || channel_names.empty())
        throw Error(ErrorCode::UnsupportedFormat, "missing EXR header attributes");
    if (channel_names.size() != 1 && channel_names.size() != 3)
        throw Error(ErrorCode::UnsupportedFormat, "EXR must have 1 or 3 channels");

    ExrImage img;
    img.width = x_max - x_min + 1;
    img.height = y_max - y_min + 1;
    img.channels = int(channel_names.size());
    img.data.resize(size_t(img.width) * img.height * img.channels);

    // channel storage order is alphabetical; map to interleaved RGB/ gray
    std::vector<int> dst_channel(channel_names.size());
    if (img.channels == 3) {
        for (size_t i = 0; i < channel_names.size(); ++i) {
            const std::string& ch = channel_names[i];
            dst_channel[i] = ch == "R" ? 0 : ch == "G" ? 1 : 2;
        }
    } else {
        dst_channel[0] = 0;
    }

    for (int y = y_min; y <= y_max; ++y) r.u64(); // offset table, rows read sequentially

    for (int row = 0; row < img.height; ++row) {
        int y = r.i32() - y_min;
        uint32_t data_size = r.u32();
        if (y < 0 || y >= img.height ||
            data_size != uint32_t(img.width) * img.channels * 4)
            throw Error(ErrorCode::UnsupportedFormat, "bad EXR scanline block");
        for (int c = 0; c < img.channels; ++c) {
            for (int x = 0; x < img.width; ++x) {
                img.data[(size_t(y) * img.width + x) * img.channels + dst_channel[c]] = r.f32();
            }
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Role-aware load / save
// ---------------------------------------------------------------------------

TextureMap load_texture(const std::filesystem::path& path, ChannelRole role) {
    std::string ext = path.extension().string();
    for (auto& ch : ext) ch = char(std::tolower(ch));

    int width, height, channels;
    std::vector<float> data;
    if (ext == ".png") {
        PngImage png = read_png(path);
        width = png.width;
        height = png.height;
        channels = png.channels;
        data = std::move(png.data);
    } else if (ext == ".exr") {
        ExrImage exr = read_exr(path);
        width = exr.width;
        height = exr.height;
        channels = exr.channels;
        data = std::move(exr.data);
        for (auto& v : data) v = std::clamp(v, 0.0f, 1.0f);
    } else {
        throw Error(ErrorCode::UnsupportedFormat, "unsupported texture format: " + path.string());
    }

    int want = role_channels(role);
    if (channels != want) {
        if (role == ChannelRole::Diffuse && channels == 1) {
            // grayscale diffuse broadcasts to 3 channels
            std::vector<float> rgb(size_t(width) * height * 3);
            for (size_t i = 0; i < size_t(width) * height; ++i)
                rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = data[i];
            data = std::move(rgb);
            channels = 3;
        } else {
            throw Error(ErrorCode::ChannelMismatch,
                        std::string(role_name(role)) + " requires " + std::to_string(want) +
                            " channel(s), file " + path.string() + " has " + std::to_string(channels));
        }
    }

    TextureMap img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.role = role;
    img.data = std::move(data);
    return img;
}

void save_texture(const std::filesystem::path& path, const TextureMap& img, bool deep16) {
    if (deep16)
        write_png16(path, img);
    else
        write_png8(path, img);
}

} // namespace matforge
