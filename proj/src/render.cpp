#include "matforge/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace { constexpr float kPi = 3.14159265358979323846f; }

#include "matforge/estimator.hpp"

namespace matforge {

GBuffer::GBuffer(int w, int h)
    : width(w),
      height(h),
      face_id(size_t(w) * h, kBackgroundFace),
      bary(size_t(w) * h * 3, 0.0f),
      uv(size_t(w) * h * 2, 0.0f),
      depth(size_t(w) * h, std::numeric_limits<float>::infinity()) {}

std::vector<Camera> make_camera_ring(int n_views, const Mesh& mesh, int image_size,
                                     float elevation, float fov_y, float fill,
                                     bool add_top_view) {
    BoundingSphere sphere = bounding_sphere(mesh);
    if (sphere.radius <= 0.0f)
        throw Error(ErrorCode::DegenerateMesh, "mesh bounding sphere has zero radius");

    float distance = sphere.radius / std::sin(fill * fov_y * 0.5f);
    std::vector<Camera> cams;
    auto place = [&](float azimuth, float elev) {
        Camera cam;
        cam.target = sphere.center;
        cam.eye = sphere.center + Vec3{std::cos(elev) * std::cos(azimuth), std::sin(elev),
                                       std::cos(elev) * std::sin(azimuth)} *
                                      distance;
        cam.up = {0.0f, 1.0f, 0.0f};
        cam.fov_y = fov_y;
        cam.width = image_size;
        cam.height = image_size;
        cam.near_z = std::max(distance - 1.5f * sphere.radius, 0.05f * sphere.radius);
        cam.far_z = distance + 1.5f * sphere.radius;
        return cam;
    };
    for (int i = 0; i < n_views; ++i) {
        float azimuth = 2.0f * kPi * i / n_views;
        cams.push_back(place(azimuth, elevation));
    }
    if (add_top_view) {
        // straight down, nudged off the pole so the up vector stays valid
        cams.push_back(place(0.0f, 1.55f));
    }
    return cams;
}

namespace {

struct ViewVertex {
    Vec3 view;   // view-space position (camera looks down -z)
    Vec2 uv;
};

Mat4 look_at(Vec3 eye, Vec3 target, Vec3 up) {
    Vec3 back = normalize(eye - target); // +z in view space
    Vec3 right = normalize(cross(up, back));
    Vec3 true_up = cross(back, right);
    Mat4 m;
    m.m[0] = right.x;
    m.m[4] = right.y;
    m.m[8] = right.z;
    m.m[1] = true_up.x;
    m.m[5] = true_up.y;
    m.m[9] = true_up.z;
    m.m[2] = back.x;
    m.m[6] = back.y;
    m.m[10] = back.z;
    m.m[12] = -(right.x * eye.x + right.y * eye.y + right.z * eye.z);
    m.m[13] = -(true_up.x * eye.x + true_up.y * eye.y + true_up.z * eye.z);
    m.m[14] = -(back.x * eye.x + back.y * eye.y + back.z * eye.z);
    return m;
}

// view-space -> screen: x right, y down (row 0 on top), depth = -view.z
struct Projector {
    float fx, fy, cx, cy;

    Vec2 project(Vec3 v) const {
        float inv = -1.0f / v.z;
        return {cx + fx * v.x * inv, cy - fy * v.y * inv};
    }
};

Projector make_projector(const Camera& cam) {
    float fy = (cam.height * 0.5f) / std::tan(cam.fov_y * 0.5f);
    return {fy, fy, cam.width * 0.5f, cam.height * 0.5f};
}

// Clip a view-space triangle against z = -near. Returns 0, 3 or up to 4
// vertices (fan-ready order).
int clip_near(const ViewVertex in[3], float near_z, ViewVertex out[4]) {
    float limit = -near_z;
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const ViewVertex& a = in[i];
        const ViewVertex& b = in[(i + 1) % 3];
        bool a_in = a.view.z <= limit;
        bool b_in = b.view.z <= limit;
        if (a_in) out[n++] = a;
        if (a_in != b_in) {
            float t = (limit - a.view.z) / (b.view.z - a.view.z);
            ViewVertex v;
            v.view = a.view + (b.view - a.view) * t;
            v.uv = a.uv + (b.uv - a.uv) * t;
            out[n++] = v;
        }
    }
    return n;
}

} // namespace

RenderOutput rasterize(const Mesh& mesh, const TextureMap& diffuse, const Camera& cam) {
    RenderOutput out;
    out.camera = cam;
    out.color = TextureMap(cam.width, cam.height, 3, ChannelRole::Diffuse);
    for (size_t i = 0; i < out.color.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) out.color.data[i * 3 + c] = kBackgroundColor[c];
    out.gbuffer = GBuffer(cam.width, cam.height);
    GBuffer& gbuf = out.gbuffer;

    Mat4 view = look_at(cam.eye, cam.target, cam.up);
    Projector proj = make_projector(cam);

    for (size_t face = 0; face < mesh.faces.size(); ++face) {
        ViewVertex base[3];
        for (int k = 0; k < 3; ++k) {
            const FaceCorner& corner = mesh.faces[face][k];
            base[k].view = transform_point(view, mesh.positions[corner.position]);
            base[k].uv = mesh.uvs[corner.uv];
        }
        ViewVertex clipped[4];
        int n = clip_near(base, cam.near_z, clipped);
        for (int tri = 0; tri + 2 < n; ++tri) {
            const ViewVertex* v[3] = {&clipped[0], &clipped[tri + 1], &clipped[tri + 2]};
            Vec2 s[3];
            float z_view[3];
            for (int k = 0; k < 3; ++k) {
                s[k] = proj.project(v[k]->view);
                z_view[k] = -v[k]->view.z;
            }
            // signed area in screen space; y runs down, CCW-in-world shows as
            // negative area, so cull area >= 0
            float area = (s[1].x - s[0].x) * (s[2].y - s[0].y) -
                         (s[1].y - s[0].y) * (s[2].x - s[0].x);
            if (area >= -1e-12f) continue; // back-facing or degenerate

            float inv_area = 1.0f / area;
            float min_x = std::min({s[0].x, s[1].x, s[2].x});
            float max_x = std::max({s[0].x, s[1].x, s[2].x});
            float min_y = std::min({s[0].y, s[1].y, s[2].y});
            float max_y = std::max({s[0].y, s[1].y, s[2].y});
            int x0 = std::max(0, int(std::floor(min_x - 0.5f)));
            int x1 = std::min(cam.width - 1, int(std::ceil(max_x + 0.5f)));
            int y0 = std::max(0, int(std::floor(min_y - 0.5f)));
            int y1 = std::min(cam.height - 1, int(std::ceil(max_y + 0.5f)));
            if (x0 > x1 || y0 > y1) continue;

            float inv_w[3] = {1.0f / z_view[0], 1.0f / z_view[1], 1.0f / z_view[2]};
            for (int y = y0; y <= y1; ++y) {
                float py = y + 0.5f;
                for (int x = x0; x <= x1; ++x) {
                    float px = x + 0.5f;
                    // screen-space barycentrics via edge functions
                    float w0 = (s[2].x - s[1].x) * (py - s[1].y) - (s[2].y - s[1].y) * (px - s[1].x);
                    float w1 = (s[0].x - s[2].x) * (py - s[2].y) - (s[0].y - s[2].y) * (px - s[2].x);
                    float w2 = (s[1].x - s[0].x) * (py - s[0].y) - (s[1].y - s[0].y) * (px - s[0].x);
                    float b0 = w0 * inv_area;
                    float b1 = w1 * inv_area;
                    float b2 = w2 * inv_area;
                    if (b0 < 0.0f || b1 < 0.0f || b2 < 0.0f) continue;

                    // perspective-correct barycentrics
                    float p0 = b0 * inv_w[0];
                    float p1 = b1 * inv_w[1];
                    float p2 = b2 * inv_w[2];
                    float sum = p0 + p1 + p2;
                    float z = 1.0f / sum;
                    if (z > cam.far_z) continue;

                    size_t pix = gbuf.index(x, y);
                    if (z >= gbuf.depth[pix]) continue;
                    p0 *= z;
                    p1 *= z;
                    p2 *= z;

                    float u = p0 * v[0]->uv.x + p1 * v[1]->uv.x + p2 * v[2]->uv.x;
                    float vv = p0 * v[0]->uv.y + p1 * v[1]->uv.y + p2 * v[2]->uv.y;

                    gbuf.depth[pix] = z;
                    gbuf.face_id[pix] = int32_t(face);
                    gbuf.bary[pix * 3] = p0;
                    gbuf.bary[pix * 3 + 1] = p1;
                    gbuf.bary[pix * 3 + 2] = p2;
                    gbuf.uv[pix * 2] = u;
                    gbuf.uv[pix * 2 + 1] = vv;

                    float rgb[3];
                    sample_nearest(diffuse, u, vv, rgb);
                    out.color.at(x, y, 0) = rgb[0];
                    out.color.at(x, y, 1) = rgb[1];
                    out.color.at(x, y, 2) = rgb[2];
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cook-Torrance preview
// ---------------------------------------------------------------------------

TextureMap shade_preview(const Mesh& mesh, const TextureMap& diffuse, const SVBRDFSet& svbrdf,
                         const Camera& cam, Vec3 light_dir) {
    for (ChannelRole role : {ChannelRole::Normal, ChannelRole::Roughness, ChannelRole::Metalness,
                             ChannelRole::Height, ChannelRole::Specular}) {
        if (!svbrdf.maps.count(role))
            throw Error(ErrorCode::MissingChannel,
                        std::string("preview needs a ") + role_name(role) + " map");
    }

    RenderOutput base = rasterize(mesh, diffuse, cam);
    const GBuffer& gbuf = base.gbuffer;
    const TextureMap& normal_map = svbrdf.maps.at(ChannelRole::Normal);
    const TextureMap& rough_map = svbrdf.maps.at(ChannelRole::Roughness);
    const TextureMap& metal_map = svbrdf.maps.at(ChannelRole::Metalness);

    Vec3 to_light = normalize(-light_dir); // light_dir points from light toward scene
    const float ambient = 0.03f;

    TextureMap img(cam.width, cam.height, 3, ChannelRole::Diffuse);
    for (size_t i = 0; i < img.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) img.data[i * 3 + c] = kBackgroundColor[c];

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            size_t pix = gbuf.index(x, y);
            int32_t face = gbuf.face_id[pix];
            if (face == kBackgroundFace) continue;

            const auto& corners = mesh.faces[face];
            Vec3 p0 = mesh.positions[corners[0].position];
            Vec3 p1 = mesh.positions[corners[1].position];
            Vec3 p2 = mesh.positions[corners[2].position];
            float b0 = gbuf.bary[pix * 3], b1 = gbuf.bary[pix * 3 + 1], b2 = gbuf.bary[pix * 3 + 2];
            Vec3 world = p0 * b0 + p1 * b1 + p2 * b2;
            Vec3 geo_n = normalize(cross(p1 - p0, p2 - p0));
            if (corners[0].normal >= 0 && corners[1].normal >= 0 && corners[2].normal >= 0) {
                // smooth shading when the mesh carries vertex normals
                geo_n = normalize(mesh.normals[corners[0].normal] * b0 +
                                  mesh.normals[corners[1].normal] * b1 +
                                  mesh.normals[corners[2].normal] * b2);
            }

            // tangent frame from UV derivatives for the normal map
            Vec2 t0 = mesh.uvs[corners[0].uv];
            Vec2 t1 = mesh.uvs[corners[1].uv];
            Vec2 t2 = mesh.uvs[corners[2].uv];
            Vec3 e1 = p1 - p0, e2 = p2 - p0;
            Vec2 duv1 = t1 - t0, duv2 = t2 - t0;
            float det = duv1.x * duv2.y - duv2.x * duv1.y;
            Vec3 n = geo_n;
            float u = gbuf.uv[pix * 2], vv = gbuf.uv[pix * 2 + 1];
            if (std::fabs(det) > 1e-12f) {
                float inv_det = 1.0f / det;
                Vec3 tangent = normalize((e1 * duv2.y - e2 * duv1.y) * inv_det);
                Vec3 bitangent = normalize((e2 * duv1.x - e1 * duv2.x) * inv_det);
                float nm[3];
                sample_nearest(normal_map, u, vv, nm);
                Vec3 tn{nm[0] * 2.0f - 1.0f, nm[1] * 2.0f - 1.0f, nm[2] * 2.0f - 1.0f};
                n = normalize(tangent * tn.x + bitangent * tn.y + geo_n * tn.z);
            }

            float rough_s[3], metal_s[3], alb[3];
            sample_nearest(rough_map, u, vv, rough_s);
            sample_nearest(metal_map, u, vv, metal_s);
            sample_nearest(diffuse, u, vv, alb);
            float roughness = std::clamp(rough_s[0], 0.02f, 1.0f);
            float metalness = std::clamp(metal_s[0], 0.0f, 1.0f);

            Vec3 view_dir = normalize(cam.eye - world);
            if (dot(n, view_dir) < 0.0f) n = -n;
            Vec3 half = normalize(view_dir + to_light);
            float ndl = std::max(dot(n, to_light), 0.0f);
            float ndv = std::max(dot(n, view_dir), 1e-4f);
            float ndh = std::max(dot(n, half), 0.0f);
            float vdh = std::max(dot(view_dir, half), 0.0f);

            float alpha = roughness * roughness;
            float a2 = alpha * alpha;
            float denom = ndh * ndh * (a2 - 1.0f) + 1.0f;
            float d_ggx = a2 / (kPi * denom * denom);
            float k = (roughness + 1.0f) * (roughness + 1.0f) / 8.0f;
            float g = (ndv / (ndv * (1.0f - k) + k)) * (ndl / (ndl * (1.0f - k) + k));
            float fresnel_w = std::pow(1.0f - vdh, 5.0f);

            for (int c = 0; c < 3; ++c) {
                float f0 = 0.04f * (1.0f - metalness) + alb[c] * metalness;
                float fresnel = f0 + (1.0f - f0) * fresnel_w;
                float spec = d_ggx * g * fresnel / std::max(4.0f * ndv * ndl, 1e-4f);
                float kd = (1.0f - fresnel) * (1.0f - metalness);
                float lit = (kd * alb[c] / kPi + spec) * ndl + ambient * alb[c];
                img.at(x, y, c) = std::clamp(lit, 0.0f, 1.0f);
            }
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// G-buffer serialization
// ---------------------------------------------------------------------------

namespace {
constexpr char kGbufMagic[8] = {'M', 'F', 'G', 'B', 'U', 'F', '0', '1'};
}

void save_gbuffer(const std::filesystem::path& path, const GBuffer& gbuf) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
    out.write(kGbufMagic, 8);
    int32_t dims[2] = {gbuf.width, gbuf.height};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(gbuf.face_id.data()),
              std::streamsize(gbuf.face_id.size() * 4));
    out.write(reinterpret_cast<const char*>(gbuf.bary.data()),
              std::streamsize(gbuf.bary.size() * 4));
    out.write(reinterpret_cast<const char*>(gbuf.uv.data()), std::streamsize(gbuf.uv.size() * 4));
    out.write(reinterpret_cast<const char*>(gbuf.depth.data()),
              std::streamsize(gbuf.depth.size() * 4));
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

GBuffer load_gbuffer(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kGbufMagic, 8) != 0)
        throw Error(ErrorCode::UnsupportedFormat, path.string() + " is not a gbuffer blob");
    int32_t dims[2];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in || dims[0] <= 0 || dims[1] <= 0)
        throw Error(ErrorCode::UnsupportedFormat, "bad gbuffer dimensions");
    GBuffer gbuf(dims[0], dims[1]);
    in.read(reinterpret_cast<char*>(gbuf.face_id.data()), std::streamsize(gbuf.face_id.size() * 4));
    in.read(reinterpret_cast<char*>(gbuf.bary.data()), std::streamsize(gbuf.bary.size() * 4));
    in.read(reinterpret_cast<char*>(gbuf.uv.data()), std::streamsize(gbuf.uv.size() * 4));
    in.read(reinterpret_cast<char*>(gbuf.depth.data()), std::streamsize(gbuf.depth.size() * 4));
    if (!in) throw Error(ErrorCode::IoFailure, "truncated gbuffer blob " + path.string());
    return gbuf;
}

void dump_gbuffer_debug(const std::filesystem::path& dir, const std::string& stem,
                        const GBuffer& gbuf) {
    std::filesystem::create_directories(dir);
    size_t n = size_t(gbuf.width) * gbuf.height;

    std::vector<uint8_t> faces(n);
    for (size_t i = 0; i < n; ++i)
        faces[i] = gbuf.face_id[i] == kBackgroundFace ? 0 : uint8_t(1 + (gbuf.face_id[i] % 254));
    write_png_gray8(dir / (stem + "_faceid.png"), gbuf.width, gbuf.height, faces);

    std::vector<float> uv_rgb(n * 3, 0.0f);
    for (size_t i = 0; i < n; ++i) {
        uv_rgb[i * 3] = gbuf.uv[i * 2];
        uv_rgb[i * 3 + 1] = gbuf.uv[i * 2 + 1];
    }
    write_exr(dir / (stem + "_uv.exr"), gbuf.width, gbuf.height, 3, uv_rgb);

    std::vector<float> depth(n);
    for (size_t i = 0; i < n; ++i)
        depth[i] = std::isfinite(gbuf.depth[i]) ? gbuf.depth[i] : 0.0f;
    write_exr(dir / (stem + "_depth.exr"), gbuf.width, gbuf.height, 1, depth);
}

} // namespace matforge
