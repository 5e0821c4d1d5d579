#include <doctest.h>

#include <cmath>

#include "matforge/estimator.hpp"
#include "matforge/fixtures.hpp"
#include "matforge/render.hpp"

using namespace matforge;

namespace {

constexpr float kPi = 3.14159265358979323846f;

Mesh full_frustum_triangle() {
    // camera at +2z looking at origin covers this with room to spare
    Mesh mesh;
    mesh.positions = {{-4, -4, 0}, {4, -4, 0}, {0, 6, 0}};
    mesh.uvs = {{0, 0}, {1, 0}, {0.5f, 1}};
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{1, 1, -1}, FaceCorner{2, 2, -1}});
    return mesh;
}

Camera simple_camera(int size = 64) {
    Camera cam;
    cam.eye = {0, 0, 2};
    cam.target = {0, 0, 0};
    cam.fov_y = kPi / 3.0f;
    cam.width = size;
    cam.height = size;
    cam.near_z = 0.1f;
    cam.far_z = 10.0f;
    return cam;
}

TextureMap flat_diffuse(float r, float g, float b) {
    TextureMap img(4, 4, 3, ChannelRole::Diffuse);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        img.data[i * 3] = r;
        img.data[i * 3 + 1] = g;
        img.data[i * 3 + 2] = b;
    }
    return img;
}

int silhouette_height(const RenderOutput& render) {
    int min_y = render.gbuffer.height, max_y = -1;
    for (int y = 0; y < render.gbuffer.height; ++y)
        for (int x = 0; x < render.gbuffer.width; ++x)
            if (render.gbuffer.covered(x, y)) {
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
    return max_y < min_y ? 0 : max_y - min_y + 1;
}

} // namespace

TEST_CASE("camera ring azimuths are equally spaced from zero") {
    Mesh sphere = fixtures::make_sphere(16, 8);
    auto cams = make_camera_ring(3, sphere, 128, 0.0f);
    REQUIRE(cams.size() == 3);
    BoundingSphere bs = bounding_sphere(sphere);
    for (int i = 0; i < 3; ++i) {
        Vec3 offset = cams[i].eye - bs.center;
        float azimuth = std::atan2(offset.z, offset.x);
        float expected = 2.0f * kPi * i / 3.0f;
        if (expected > kPi) expected -= 2.0f * kPi;
        CHECK(azimuth == doctest::Approx(expected).epsilon(1e-4));
        CHECK(offset.y == doctest::Approx(0.0f).epsilon(1e-5));
    }
}

TEST_CASE("single view sits at azimuth zero") {
    Mesh cube = fixtures::make_cube();
    auto cams = make_camera_ring(1, cube, 64, 0.3f);
    REQUIRE(cams.size() == 1);
    BoundingSphere bs = bounding_sphere(cube);
    Vec3 offset = cams[0].eye - bs.center;
    CHECK(std::atan2(offset.z, offset.x) == doctest::Approx(0.0f).epsilon(1e-4));
}

TEST_CASE("degenerate mesh rejected") {
    Mesh mesh;
    mesh.positions = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    mesh.uvs = {{0, 0}, {0, 0}, {0, 0}};
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{1, 1, -1}, FaceCorner{2, 2, -1}});
    CHECK_THROWS_WITH_AS(make_camera_ring(3, mesh, 64, 0.0f), doctest::Contains("DegenerateMesh"),
                         Error);
}

TEST_CASE("fill fraction: unit sphere at fov 60 sits at distance 1/sin(24deg)") {
    // oracle: render and measure the silhouette against 80% of the frame
    Mesh sphere = fixtures::make_sphere(64, 32);
    float fov = kPi / 3.0f;
    auto cams = make_camera_ring(1, sphere, 256, 0.0f, fov);
    BoundingSphere bs = bounding_sphere(sphere);
    float dist = length(cams[0].eye - bs.center);
    CHECK(dist == doctest::Approx(1.0f / std::sin(0.8f * fov * 0.5f)).epsilon(1e-2));

    RenderOutput render = rasterize(sphere, flat_diffuse(1, 0, 0), cams[0]);
    float frac = float(silhouette_height(render)) / 256.0f;
    CHECK(frac == doctest::Approx(0.8f).epsilon(0.03));
}

TEST_CASE("full-frame triangle covers the center with unit barycentrics") {
    Mesh mesh = full_frustum_triangle();
    RenderOutput render = rasterize(mesh, flat_diffuse(0.2f, 0.4f, 0.6f), simple_camera());
    const GBuffer& gbuf = render.gbuffer;
    size_t center = gbuf.index(32, 32);
    REQUIRE(gbuf.face_id[center] == 0);
    float sum = gbuf.bary[center * 3] + gbuf.bary[center * 3 + 1] + gbuf.bary[center * 3 + 2];
    CHECK(sum == doctest::Approx(1.0f).epsilon(1e-5));
    for (int k = 0; k < 3; ++k) CHECK(gbuf.bary[center * 3 + k] >= -1e-6f);
    CHECK(render.color.at(32, 32, 0) == doctest::Approx(0.2f));
}

TEST_CASE("z-buffer keeps the nearer of two coaxial triangles") {
    Mesh mesh;
    mesh.positions = {{-4, -4, 1}, {4, -4, 1}, {0, 6, 1},   // face 0 at z=1 (closer to +3z eye)
                      {-4, -4, 0}, {4, -4, 0}, {0, 6, 0}};  // face 1 at z=0
    mesh.uvs = {{0, 0}, {1, 0}, {0.5f, 1}};
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{1, 1, -1}, FaceCorner{2, 2, -1}});
    mesh.faces.push_back({FaceCorner{3, 0, -1}, FaceCorner{4, 1, -1}, FaceCorner{5, 2, -1}});
    Camera cam = simple_camera();
    cam.eye = {0, 0, 3};
    RenderOutput render = rasterize(mesh, flat_diffuse(1, 1, 1), cam);
    size_t center = render.gbuffer.index(32, 32);
    CHECK(render.gbuffer.face_id[center] == 0);
    CHECK(render.gbuffer.depth[center] == doctest::Approx(2.0f).epsilon(1e-3));
}

TEST_CASE("checkerboard quad: center pixels sample the analytic texel") {
    // quad facing the camera squarely, uv in [0,1]^2
    Mesh mesh;
    mesh.positions = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
    mesh.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{1, 1, -1}, FaceCorner{2, 2, -1}});
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{2, 2, -1}, FaceCorner{3, 3, -1}});

    TextureMap checker(4, 4, 3, ChannelRole::Diffuse);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) checker.at(x, y, c) = (x + y) % 2 ? 1.0f : 0.0f;

    Camera cam = simple_camera(128);
    RenderOutput render = rasterize(mesh, checker, cam);

    // oracle: analytic uv of each pixel center on the z=0 plane
    float fy = (cam.height * 0.5f) / std::tan(cam.fov_y * 0.5f);
    int hits = 0;
    for (int y = 40; y < 90; y += 7) {
        for (int x = 40; x < 90; x += 7) {
            if (!render.gbuffer.covered(x, y)) continue;
            float wx = (x + 0.5f - 64.0f) / fy * 2.0f;
            float wy = -(y + 0.5f - 64.0f) / fy * 2.0f;
            float u = (wx + 1.0f) * 0.5f;
            float v = (wy + 1.0f) * 0.5f;
            if (u < 0.02f || u > 0.98f || v < 0.02f || v > 0.98f) continue;
            // keep clear of texel boundaries where float error could flip cells
            float cu = u * 4.0f, cv = (1 - v) * 4.0f;
            if (std::abs(cu - std::round(cu)) < 0.05f || std::abs(cv - std::round(cv)) < 0.05f)
                continue;
            int tx = std::min(int(cu), 3);
            int ty = std::min(int(cv), 3);
            float expected = (tx + ty) % 2 ? 1.0f : 0.0f;
            CHECK(render.color.at(x, y, 0) == doctest::Approx(expected));
            ++hits;
        }
    }
    CHECK(hits > 10);
}

TEST_CASE("gbuffer uv equals barycentric-interpolated corner uvs") {
    Mesh sphere = fixtures::make_sphere(24, 12);
    auto cams = make_camera_ring(1, sphere, 128, 0.3f);
    RenderOutput render = rasterize(sphere, flat_diffuse(0.5f, 0.5f, 0.5f), cams[0]);
    const GBuffer& gbuf = render.gbuffer;
    for (int y = 0; y < 128; y += 5) {
        for (int x = 0; x < 128; x += 5) {
            if (!gbuf.covered(x, y)) continue;
            size_t pix = gbuf.index(x, y);
            const auto& face = sphere.faces[gbuf.face_id[pix]];
            float u = 0, v = 0;
            for (int k = 0; k < 3; ++k) {
                u += gbuf.bary[pix * 3 + k] * sphere.uvs[face[k].uv].x;
                v += gbuf.bary[pix * 3 + k] * sphere.uvs[face[k].uv].y;
            }
            CHECK(std::abs(u - gbuf.uv[pix * 2]) < 1e-5f);
            CHECK(std::abs(v - gbuf.uv[pix * 2 + 1]) < 1e-5f);
        }
    }
}

TEST_CASE("covered pixels reproject within half a pixel") {
    Mesh cube = fixtures::make_cube();
    auto cams = make_camera_ring(1, cube, 128, 0.4f);
    const Camera& cam = cams[0];
    RenderOutput render = rasterize(cube, flat_diffuse(1, 1, 1), cam);
    const GBuffer& gbuf = render.gbuffer;

    // rebuild the projection the same way the rasterizer does
    Vec3 back = normalize(cam.eye - cam.target);
    Vec3 right = normalize(cross(cam.up, back));
    Vec3 up = cross(back, right);
    float fy = (cam.height * 0.5f) / std::tan(cam.fov_y * 0.5f);

    int checked = 0;
    for (int y = 0; y < 128; y += 3) {
        for (int x = 0; x < 128; x += 3) {
            if (!gbuf.covered(x, y)) continue;
            size_t pix = gbuf.index(x, y);
            const auto& face = cube.faces[gbuf.face_id[pix]];
            Vec3 world{0, 0, 0};
            for (int k = 0; k < 3; ++k)
                world = world + cube.positions[face[k].position] * gbuf.bary[pix * 3 + k];
            Vec3 rel = world - cam.eye;
            Vec3 view{dot(rel, right), dot(rel, up), dot(rel, back)};
            float sx = 64.0f + fy * view.x / -view.z;
            float sy = 64.0f - fy * view.y / -view.z;
            CHECK(std::abs(sx - (x + 0.5f)) < 0.5f);
            CHECK(std::abs(sy - (y + 0.5f)) < 0.5f);
            CHECK(gbuf.depth[pix] == doctest::Approx(-view.z).epsilon(1e-3));
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("rasterization is bitwise deterministic") {
    Mesh cube = fixtures::make_cube();
    TextureMap diffuse = fixtures::make_cube_diffuse(64);
    auto cams = make_camera_ring(1, cube, 96, 0.35f);
    RenderOutput a = rasterize(cube, diffuse, cams[0]);
    RenderOutput b = rasterize(cube, diffuse, cams[0]);
    CHECK(a.color.data == b.color.data);
    CHECK(a.gbuffer.face_id == b.gbuffer.face_id);
    CHECK(a.gbuffer.depth == b.gbuffer.depth);
}

TEST_CASE("silhouette coverage shrinks with camera distance") {
    Mesh sphere = fixtures::make_sphere(32, 16);
    auto cams = make_camera_ring(1, sphere, 128, 0.0f);
    Camera near_cam = cams[0];
    int64_t prev = -1;
    for (float scale : {1.0f, 1.3f, 1.7f, 2.2f}) {
        Camera cam = near_cam;
        cam.eye = cam.target + (near_cam.eye - near_cam.target) * scale;
        cam.far_z *= scale;
        RenderOutput render = rasterize(sphere, flat_diffuse(1, 1, 1), cam);
        int64_t cover = 0;
        for (int i = 0; i < 128 * 128; ++i) cover += render.gbuffer.face_id[i] != kBackgroundFace;
        if (prev >= 0) CHECK(cover < prev);
        prev = cover;
    }
}

TEST_CASE("gbuffer blob round trips") {
    Mesh cube = fixtures::make_cube();
    auto cams = make_camera_ring(1, cube, 48, 0.35f);
    RenderOutput render = rasterize(cube, flat_diffuse(1, 0, 0), cams[0]);
    auto path = std::filesystem::temp_directory_path() / "matforge_test_gbuf" / "view.gbuf";
    save_gbuffer(path, render.gbuffer);
    GBuffer back = load_gbuffer(path);
    CHECK(back.face_id == render.gbuffer.face_id);
    CHECK(back.bary == render.gbuffer.bary);
    CHECK(back.uv == render.gbuffer.uv);
    CHECK(back.depth == render.gbuffer.depth);
}

// --- Cook-Torrance preview ordering properties ---

namespace {

SVBRDFSet uniform_svbrdf(int size, float roughness, float metalness) {
    SVBRDFSet set;
    TextureMap normal(size, size, 3, ChannelRole::Normal);
    for (size_t i = 0; i < normal.pixel_count(); ++i) {
        normal.data[i * 3] = 0.5f;
        normal.data[i * 3 + 1] = 0.5f;
        normal.data[i * 3 + 2] = 1.0f;
    }
    set.maps.emplace(ChannelRole::Normal, std::move(normal));
    set.maps.emplace(ChannelRole::Roughness,
                     TextureMap(size, size, 1, ChannelRole::Roughness, roughness));
    set.maps.emplace(ChannelRole::Metalness,
                     TextureMap(size, size, 1, ChannelRole::Metalness, metalness));
    set.maps.emplace(ChannelRole::Height, TextureMap(size, size, 1, ChannelRole::Height, 0.5f));
    set.maps.emplace(ChannelRole::Specular, TextureMap(size, size, 1, ChannelRole::Specular, 0.5f));
    return set;
}

float peak_luminance(const TextureMap& img) {
    float peak = 0.0f;
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        float lum = (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3.0f;
        peak = std::max(peak, lum);
    }
    return peak;
}

} // namespace

TEST_CASE("mirror-angle metal highlight beats diffuse-only shading") {
    Mesh sphere = fixtures::make_sphere(32, 16);
    auto cams = make_camera_ring(1, sphere, 96, 0.0f);
    TextureMap diffuse = flat_diffuse(0.6f, 0.5f, 0.4f);
    Vec3 light_dir = normalize(Vec3{0, 0, 0} - (cams[0].eye - cams[0].target));

    SVBRDFSet shiny = uniform_svbrdf(8, 0.05f, 1.0f);
    SVBRDFSet matte = uniform_svbrdf(8, 1.0f, 0.0f);
    TextureMap img_shiny = shade_preview(sphere, diffuse, shiny, cams[0], light_dir);
    TextureMap img_matte = shade_preview(sphere, diffuse, matte, cams[0], light_dir);
    CHECK(peak_luminance(img_shiny) > peak_luminance(img_matte));
}

TEST_CASE("rough highlight lobe is wider than a sharp one") {
    Mesh sphere = fixtures::make_sphere(32, 16);
    auto cams = make_camera_ring(1, sphere, 96, 0.0f);
    TextureMap diffuse = flat_diffuse(0.5f, 0.5f, 0.5f);
    Vec3 light_dir = normalize(Vec3{0, 0, 0} - (cams[0].eye - cams[0].target));

    auto lobe_size = [&](float roughness) {
        SVBRDFSet set = uniform_svbrdf(8, roughness, 1.0f);
        TextureMap img = shade_preview(sphere, diffuse, set, cams[0], light_dir);
        float peak = peak_luminance(img);
        int above = 0;
        for (size_t i = 0; i < img.pixel_count(); ++i) {
            float lum = (img.data[i * 3] + img.data[i * 3 + 1] + img.data[i * 3 + 2]) / 3.0f;
            if (lum > 0.9f * peak) ++above;
        }
        return above;
    };
    CHECK(lobe_size(1.0f) > lobe_size(0.1f));
}

TEST_CASE("fully rough black dielectric stays under the fresnel floor") {
    // black albedo kills diffuse and ambient; at roughness 1 the specular
    // lobe radiance peaks well below the 4% fresnel floor
    Mesh sphere = fixtures::make_sphere(24, 12);
    auto cams = make_camera_ring(1, sphere, 64, 0.0f);
    TextureMap diffuse = flat_diffuse(0.0f, 0.0f, 0.0f);
    SVBRDFSet set = uniform_svbrdf(8, 1.0f, 0.0f);
    TextureMap img =
        shade_preview(sphere, diffuse, set, cams[0], normalize(Vec3{0, 0, 0} - cams[0].eye));
    float max_fg = 0.0f;
    RenderOutput base = rasterize(sphere, diffuse, cams[0]);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            if (!base.gbuffer.covered(x, y)) continue;
            for (int c = 0; c < 3; ++c) max_fg = std::max(max_fg, img.at(x, y, c));
        }
    CHECK(max_fg <= 0.04f + 1e-3f);
}

TEST_CASE("preview without a channel is MissingChannel") {
    Mesh sphere = fixtures::make_sphere(8, 4);
    auto cams = make_camera_ring(1, sphere, 32, 0.0f);
    SVBRDFSet set = uniform_svbrdf(4, 0.5f, 0.0f);
    set.maps.erase(ChannelRole::Height);
    CHECK_THROWS_WITH_AS(shade_preview(sphere, flat_diffuse(1, 1, 1), set, cams[0], Vec3{0, -1, 0}),
                         doctest::Contains("MissingChannel"), Error);
}
