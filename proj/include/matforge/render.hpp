#pragma once

#include <filesystem>
#include <vector>

#include "matforge/geom.hpp"
#include "matforge/image.hpp"
#include "matforge/mesh.hpp"

namespace matforge {

struct Camera {
    Vec3 eye;
    Vec3 target;
    Vec3 up{0.0f, 1.0f, 0.0f};
    float fov_y = 0.785398163f; // radians
    int width = 512;
    int height = 512;
    float near_z = 0.1f;
    float far_z = 100.0f;
};

constexpr int kBackgroundFace = -1;

// Per-pixel geometry emitted by the rasterizer. Barycentrics are
// perspective-correct; depth is view-space z.
struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<int32_t> face_id;
    std::vector<float> bary;  // 3 per pixel
    std::vector<float> uv;    // 2 per pixel
    std::vector<float> depth; // view z, +inf on background

    GBuffer() = default;
    GBuffer(int w, int h);

    bool covered(int x, int y) const { return face_id[size_t(y) * width + x] != kBackgroundFace; }
    size_t index(int x, int y) const { return size_t(y) * width + x; }
};

struct RenderOutput {
    TextureMap color; // RGB, background = kBackgroundColor
    GBuffer gbuffer;
    Camera camera;
};

constexpr float kBackgroundColor[3] = {0.15f, 0.15f, 0.15f};

// Cameras on a circle around the mesh bounding sphere at the given elevation,
// azimuths equally spaced from 0, distance set so the sphere fills 80% of the
// vertical fov.
std::vector<Camera> make_camera_ring(int n_views, const Mesh& mesh, int image_size,
                                     float elevation, float fov_y = 0.785398163f,
                                     float fill = 0.8f, bool add_top_view = false);

// Unlit perspective-correct rasterization: color = nearest-texel diffuse
// sample at the interpolated UV, back faces culled, z-buffered.
RenderOutput rasterize(const Mesh& mesh, const TextureMap& diffuse, const Camera& cam);

struct SVBRDFSet; // estimator.hpp

// Cook-Torrance (GGX + Smith + Schlick) single-light preview. Inspection
// only; nothing downstream consumes it.
TextureMap shade_preview(const Mesh& mesh, const TextureMap& diffuse, const SVBRDFSet& svbrdf,
                         const Camera& cam, Vec3 light_dir);

// .gbuf blob so stages can hand the G-buffer across process boundaries.
void save_gbuffer(const std::filesystem::path& path, const GBuffer& gbuf);
GBuffer load_gbuffer(const std::filesystem::path& path);

// Debug dumps behind --dump-gbuffer: face ids as gray PNG, uv/bary/depth EXR.
void dump_gbuffer_debug(const std::filesystem::path& dir, const std::string& stem,
                        const GBuffer& gbuf);

} // namespace matforge
