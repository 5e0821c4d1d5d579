#include "matforge/fixtures.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace matforge::fixtures {

namespace {

constexpr float kPi = 3.14159265358979323846f;

// deterministic per-texel noise
float hash_noise(uint32_t x, uint32_t y, uint32_t seed) {
    uint32_t h = x * 374761393u + y * 668265263u + seed * 2246822519u;
    h = (h ^ (h >> 13)) * 1274126177u;
    h ^= h >> 16;
    return (h & 0xFFFF) / 65535.0f;
}

} // namespace

Mesh make_cube() {
    Mesh mesh;
    struct Face {
        Vec3 origin, e1, e2;
    };
    // cross(e1, e2) points outward for every face
    const Face cube_faces[6] = {
        {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, // +x
        {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}}, // -x
        {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}, // +y
        {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}}, // -y
        {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}, // +z
        {{0, 0, 0}, {0, 1, 0}, {1, 0, 0}}, // -z
    };
    for (int f = 0; f < 6; ++f) {
        const Face& face = cube_faces[f];
        int base_pos = int(mesh.positions.size());
        mesh.positions.push_back(face.origin);
        mesh.positions.push_back(face.origin + face.e1);
        mesh.positions.push_back(face.origin + face.e1 + face.e2);
        mesh.positions.push_back(face.origin + face.e2);

        // atlas cell (f%3, f/3) in a 3x2 grid, inset best avoided: exact cell edges
        float u0 = (f % 3) / 3.0f, u1 = (f % 3 + 1) / 3.0f;
        float v0 = (f / 3) / 2.0f, v1 = (f / 3 + 1) / 2.0f;
        int base_uv = int(mesh.uvs.size());
        mesh.uvs.push_back({u0, v0});
        mesh.uvs.push_back({u1, v0});
        mesh.uvs.push_back({u1, v1});
        mesh.uvs.push_back({u0, v1});

        auto corner = [&](int k) { return FaceCorner{base_pos + k, base_uv + k, -1}; };
        mesh.faces.push_back({corner(0), corner(1), corner(2)});
        mesh.faces.push_back({corner(0), corner(2), corner(3)});
    }
    return mesh;
}

Mesh make_sphere(int segments, int rings) {
    Mesh mesh;
    for (int r = 0; r <= rings; ++r) {
        float theta = kPi * r / rings;
        for (int s = 0; s <= segments; ++s) {
            float phi = 2.0f * kPi * s / segments;
            Vec3 p{std::sin(theta) * std::cos(phi), std::cos(theta),
                   std::sin(theta) * std::sin(phi)};
            mesh.positions.push_back(p);
            mesh.normals.push_back(p); // unit sphere: position is the normal
            // equal-area vertical mapping keeps texel density uniform over
            // the surface (no pole waste in the atlas)
            mesh.uvs.push_back({float(s) / segments, 0.5f + 0.5f * std::cos(theta)});
        }
    }
    auto vid = [&](int r, int s) { return r * (segments + 1) + s; };
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            FaceCorner a{vid(r, s), vid(r, s), vid(r, s)};
            FaceCorner b{vid(r + 1, s), vid(r + 1, s), vid(r + 1, s)};
            FaceCorner c{vid(r + 1, s + 1), vid(r + 1, s + 1), vid(r + 1, s + 1)};
            FaceCorner d{vid(r, s + 1), vid(r, s + 1), vid(r, s + 1)};
            if (r > 0) mesh.faces.push_back({a, d, b});
            if (r < rings - 1) mesh.faces.push_back({d, c, b});
        }
    }
    return mesh;
}

namespace {

struct ToyMaterial {
    const char* id;
    const char* major_type;
    const char* subcategory;
    const char* caption;
    float base[3];
    float roughness;
    float metalness;
    bool black_diffuse; // exercise the basecolor substitution rule
};

const ToyMaterial kToyMaterials[12] = {
    {"metal_gold_01", "metal", "gold",
     "Polished yellow-gold surface, warm saturated color, faint brushed pattern, very low "
     "roughness, fully metallic, no embossing, pristine condition.",
     {0.85f, 0.65f, 0.20f}, 0.15f, 1.0f, false},
    {"metal_gold_02", "metal", "gold",
     "Aged gold with muted amber color, mottled patina pattern, medium roughness, fully "
     "metallic, shallow hammered embossing, worn condition.",
     {0.90f, 0.75f, 0.35f}, 0.45f, 1.0f, false},
    {"metal_steel_01", "metal", "steel",
     "Cool gray steel, uniform color, fine linear brushing pattern, low roughness, fully "
     "metallic, no embossing, clean industrial condition.",
     {0.55f, 0.57f, 0.60f}, 0.25f, 1.0f, false},
    {"metal_steel_02", "metal", "steel",
     "Dark gunmetal steel, slightly blued color, subtle grain pattern, medium-high roughness, "
     "fully metallic, no embossing, lightly oxidized condition.",
     {0.40f, 0.42f, 0.46f}, 0.60f, 1.0f, true},
    {"wood_oak_01", "wood", "oak",
     "Medium brown oak with straight grain pattern, warm color, medium roughness, "
     "non-metallic, pore-line embossing along the grain, finished condition.",
     {0.55f, 0.36f, 0.18f}, 0.55f, 0.0f, false},
    {"wood_oak_02", "wood", "oak",
     "Light honey oak, wavy cathedral grain pattern, slightly lighter color, medium "
     "roughness, non-metallic, shallow grain embossing, new condition.",
     {0.62f, 0.44f, 0.24f}, 0.50f, 0.0f, false},
    {"wood_pine_01", "wood", "pine",
     "Pale cream pine, wide soft grain pattern with sparse knots, high roughness, "
     "non-metallic, minimal embossing, raw sanded condition.",
     {0.75f, 0.60f, 0.40f}, 0.70f, 0.0f, false},
    {"wood_pine_02", "wood", "pine",
     "Amber-sealed pine, pronounced ring pattern, warm color, medium roughness, "
     "non-metallic, faint ring embossing, varnished condition.",
     {0.70f, 0.52f, 0.30f}, 0.40f, 0.0f, false},
    {"fabric_denim_01", "fabric", "denim",
     "Indigo denim twill, diagonal weave pattern, deep blue color, high roughness, "
     "non-metallic, ribbed weave embossing, sturdy new condition.",
     {0.20f, 0.30f, 0.55f}, 0.85f, 0.0f, false},
    {"fabric_denim_02", "fabric", "denim",
     "Washed light-blue denim, faded uneven color pattern, high roughness, non-metallic, "
     "soft weave embossing, worn-in condition.",
     {0.25f, 0.35f, 0.60f}, 0.90f, 0.0f, false},
    {"fabric_wool_01", "fabric", "wool",
     "Undyed cream wool knit, looped stitch pattern, off-white color, very high roughness, "
     "non-metallic, chunky knit embossing, fuzzy condition.",
     {0.80f, 0.78f, 0.72f}, 0.95f, 0.0f, false},
    {"fabric_wool_02", "fabric", "wool",
     "Deep crimson felted wool, matted fiber pattern, saturated red color, very high "
     "roughness, non-metallic, irregular felt embossing, dense condition.",
     {0.60f, 0.10f, 0.12f}, 0.92f, 0.0f, false},
};

TextureMap make_material_diffuse(const ToyMaterial& mat, int size, uint32_t seed) {
    TextureMap img(size, size, 3, ChannelRole::Diffuse);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            float stripe = 0.04f * std::sin(2.0f * kPi * (x + 2.0f * y) / size * 3.0f);
            float noise = (hash_noise(x, y, seed) - 0.5f) * 0.06f;
            for (int c = 0; c < 3; ++c) {
                float v = mat.base[c] + stripe + noise;
                img.at(x, y, c) = std::min(std::max(v, 0.0f), 1.0f);
            }
        }
    }
    return img;
}

} // namespace

int write_toy_library(const std::filesystem::path& root) {
    std::filesystem::create_directories(root);
    nlohmann::json library;
    library["materials"] = nlohmann::json::array();

    for (uint32_t m = 0; m < 12; ++m) {
        const ToyMaterial& mat = kToyMaterials[m];
        std::filesystem::path dir = root / mat.id;
        std::filesystem::create_directories(dir);
        const int size = 64;

        TextureMap diffuse = make_material_diffuse(mat, size, m + 1);
        if (mat.black_diffuse) {
            TextureMap black(size, size, 3, ChannelRole::Diffuse, 0.0f);
            write_png8(dir / "diffuse.png", black);
            diffuse.role = ChannelRole::Albedo;
            write_png8(dir / "basecolor.png", diffuse);
        } else {
            write_png8(dir / "diffuse.png", diffuse);
        }

        TextureMap height(size, size, 1, ChannelRole::Height);
        TextureMap normal(size, size, 3, ChannelRole::Normal);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                float h = 0.5f + 0.3f * std::sin(2.0f * kPi * x / size * (2 + int(m) % 3)) *
                                     std::cos(2.0f * kPi * y / size * (1 + int(m) % 4));
                height.at(x, y) = h;
            }
        }
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                float hx = height.at((x + 1) % size, y) - height.at(x, y);
                float hy = height.at(x, (y + 1) % size) - height.at(x, y);
                Vec3 n = normalize({-hx * 4.0f, -hy * 4.0f, 1.0f});
                normal.at(x, y, 0) = n.x * 0.5f + 0.5f;
                normal.at(x, y, 1) = n.y * 0.5f + 0.5f;
                normal.at(x, y, 2) = n.z * 0.5f + 0.5f;
            }
        }
        TextureMap roughness(size, size, 1, ChannelRole::Roughness);
        TextureMap metalness(size, size, 1, ChannelRole::Metalness, mat.metalness);
        TextureMap specular(size, size, 1, ChannelRole::Specular);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                roughness.at(x, y) = std::min(
                    std::max(mat.roughness + (hash_noise(x, y, 100 + m) - 0.5f) * 0.1f, 0.0f), 1.0f);
                specular.at(x, y) = 0.5f + 0.1f * std::sin(2.0f * kPi * y / size);
            }
        }
        write_png8(dir / "normal.png", normal);
        write_png8(dir / "roughness.png", roughness);
        write_png8(dir / "metalness.png", metalness);
        write_png8(dir / "height.png", height);
        write_png8(dir / "specular.png", specular);

        nlohmann::json manifest;
        manifest["id"] = mat.id;
        manifest["major_type"] = mat.major_type;
        manifest["subcategory"] = mat.subcategory;
        manifest["caption"] = mat.caption;
        std::ofstream out(dir / "material.json", std::ios::trunc);
        out << manifest.dump(2) << "\n";

        library["materials"].push_back(mat.id);
    }
    std::ofstream out(root / "library.json", std::ios::trunc);
    out << library.dump(2) << "\n";
    return 12;
}

TextureMap make_cube_diffuse(int size) {
    // one toy-material base color per atlas cell
    const float cell_colors[6][3] = {
        {0.85f, 0.65f, 0.20f}, // gold
        {0.55f, 0.57f, 0.60f}, // steel
        {0.55f, 0.36f, 0.18f}, // oak
        {0.75f, 0.60f, 0.40f}, // pine
        {0.20f, 0.30f, 0.55f}, // denim
        {0.80f, 0.78f, 0.72f}, // wool
    };
    // flat per-cell colors: segmentation fixtures need spatially coherent
    // texture, white noise shatters connected components under nearest
    // sampling
    TextureMap img(size, size, 3, ChannelRole::Diffuse);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            float u = (x + 0.5f) / size;
            float v = 1.0f - (y + 0.5f) / size;
            int cell = std::min(int(u * 3), 2) + 3 * std::min(int(v * 2), 1);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = cell_colors[cell][c];
        }
    }
    return img;
}

TextureMap make_sphere_diffuse(int size) {
    TextureMap img(size, size, 3, ChannelRole::Diffuse);
    const float top[3] = {0.55f, 0.36f, 0.18f};    // oak
    const float bottom[3] = {0.20f, 0.30f, 0.55f}; // denim
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            bool upper = y < size / 2; // row 0 = v=1 = sphere top
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = upper ? top[c] : bottom[c];
        }
    }
    return img;
}

void write_demo_assets(const std::filesystem::path& dir, int texture_size) {
    std::filesystem::create_directories(dir);
    save_obj(dir / "cube.obj", make_cube());
    write_png8(dir / "cube_diffuse.png", make_cube_diffuse(texture_size));
    save_obj(dir / "sphere.obj", make_sphere());
    write_png8(dir / "sphere_diffuse.png", make_sphere_diffuse(texture_size));
}

} // namespace matforge::fixtures
