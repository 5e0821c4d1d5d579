#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "matforge/fixtures.hpp"
#include "matforge/partition.hpp"

using namespace matforge;

namespace {

Mesh full_atlas_quad() {
    // z=0 quad facing +z, uv covering [0,1]^2
    Mesh mesh;
    mesh.positions = {{-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
    mesh.uvs = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{1, 1, -1}, FaceCorner{2, 2, -1}});
    mesh.faces.push_back({FaceCorner{0, 0, -1}, FaceCorner{2, 2, -1}, FaceCorner{3, 3, -1}});
    return mesh;
}

Camera facing_camera(int size) {
    Camera cam;
    cam.eye = {0, 0, 2.4f};
    cam.target = {0, 0, 0};
    cam.fov_y = 3.14159265f / 3.0f;
    cam.width = size;
    cam.height = size;
    cam.near_z = 0.2f;
    cam.far_z = 10.0f;
    return cam;
}

RegionMask full_foreground_mask(const GBuffer& gbuf, int view = 0, int label = 1) {
    RegionMask mask;
    mask.view_id = view;
    mask.label = label;
    mask.width = gbuf.width;
    mask.height = gbuf.height;
    mask.mask.assign(size_t(gbuf.width) * gbuf.height, 0);
    for (int y = 0; y < gbuf.height; ++y)
        for (int x = 0; x < gbuf.width; ++x)
            if (gbuf.covered(x, y)) mask.set(x, y, true);
    mask.pixel_count = 0;
    for (uint8_t v : mask.mask) mask.pixel_count += v;
    return mask;
}

UVMask uniform_uvmask(int tex, const std::vector<std::pair<int, int>>& spans_x, float depth,
                      int view = 0, int label = 1) {
    UVMask mask;
    mask.tex_size = tex;
    mask.view_id = view;
    mask.label = label;
    mask.texels.assign(size_t(tex) * tex, 0);
    mask.depth.assign(size_t(tex) * tex, std::numeric_limits<float>::infinity());
    for (auto [x0, x1] : spans_x)
        for (int y = 0; y < tex; ++y)
            for (int x = x0; x < x1; ++x) {
                mask.texels[size_t(y) * tex + x] = 1;
                mask.depth[size_t(y) * tex + x] = depth;
            }
    mask.texel_count = 0;
    for (uint8_t v : mask.texels) mask.texel_count += v;
    return mask;
}

OccupancyGrid full_occupancy(int tex) {
    OccupancyGrid grid;
    grid.size = tex;
    grid.occupied.assign(size_t(tex) * tex, 1);
    return grid;
}

} // namespace

TEST_CASE("full-atlas quad occupies every texel") {
    OccupancyGrid grid = build_occupancy(full_atlas_quad(), 32);
    CHECK(grid.count() == 32 * 32);
}

TEST_CASE("quarter-atlas mesh occupies a quarter plus the dilation band") {
    Mesh mesh = full_atlas_quad();
    for (Vec2& uv : mesh.uvs) uv = {uv.x * 0.5f, uv.y * 0.5f};
    int tex = 64;
    OccupancyGrid undilated = build_occupancy_undilated(mesh, tex);
    OccupancyGrid dilated = build_occupancy(mesh, tex);

    // oracle: plain point-in-triangle count is about a quarter of the atlas
    CHECK(double(undilated.count()) ==
          doctest::Approx(tex * tex * 0.25).epsilon(0.05));
    int64_t band = dilated.count() - undilated.count();
    CHECK(band > 0);
    CHECK(band < tex * 3); // one-texel ring around a 32x32 block
    // dilation only grows the set
    for (int y = 0; y < tex; ++y)
        for (int x = 0; x < tex; ++x)
            if (undilated.test(x, y)) CHECK(dilated.test(x, y));
}

TEST_CASE("meshless uvs rejected") {
    Mesh empty;
    CHECK_THROWS_AS(build_occupancy(empty, 16), Error);
}

TEST_CASE("full-foreground mask back-projects onto the quad footprint") {
    Mesh mesh = full_atlas_quad();
    int res = 128, tex = 128;
    TextureMap diffuse(4, 4, 3, ChannelRole::Diffuse, 0.5f);
    RenderOutput render = rasterize(mesh, diffuse, facing_camera(res));
    OccupancyGrid occupancy = build_occupancy(mesh, tex);
    RegionMask mask = full_foreground_mask(render.gbuffer);

    UVMask uv = backproject_mask(mask, render.gbuffer, tex, occupancy);
    CHECK(double(uv.texel_count) >= 0.99 * double(occupancy.count()));
}

TEST_CASE("empty mask back-projects to nothing") {
    Mesh mesh = full_atlas_quad();
    RenderOutput render = rasterize(mesh, TextureMap(4, 4, 3, ChannelRole::Diffuse, 0.5f),
                                    facing_camera(64));
    OccupancyGrid occupancy = build_occupancy(mesh, 64);
    RegionMask mask;
    mask.width = 64;
    mask.height = 64;
    mask.mask.assign(64 * 64, 0);
    UVMask uv = backproject_mask(mask, render.gbuffer, 64, occupancy);
    CHECK(uv.texel_count == 0);
}

TEST_CASE("occluded geometry contributes nothing") {
    // two stacked quads: front covers [0,0.5]^2 uv, back covers [0.5,1]^2
    Mesh mesh;
    mesh.positions = {{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1},
                      {-1, -1, 0}, {1, -1, 0}, {1, 1, 0}, {-1, 1, 0}};
    mesh.uvs = {{0, 0}, {0.5f, 0}, {0.5f, 0.5f}, {0, 0.5f},
                {0.5f, 0.5f}, {1, 0.5f}, {1, 1}, {0.5f, 1}};
    auto corner = [](int p, int t) { return FaceCorner{p, t, -1}; };
    mesh.faces.push_back({corner(0, 0), corner(1, 1), corner(2, 2)});
    mesh.faces.push_back({corner(0, 0), corner(2, 2), corner(3, 3)});
    mesh.faces.push_back({corner(4, 4), corner(5, 5), corner(6, 6)});
    mesh.faces.push_back({corner(4, 4), corner(6, 6), corner(7, 7)});

    int res = 96, tex = 64;
    RenderOutput render = rasterize(mesh, TextureMap(4, 4, 3, ChannelRole::Diffuse, 0.5f),
                                    facing_camera(res));
    OccupancyGrid occupancy = build_occupancy(mesh, tex);
    RegionMask mask = full_foreground_mask(render.gbuffer);
    UVMask uv = backproject_mask(mask, render.gbuffer, tex, occupancy);

    // front quad's uv chart is hit, the occluded back quad's chart is not
    int64_t front = 0, back = 0;
    for (int y = 0; y < tex; ++y) {
        for (int x = 0; x < tex; ++x) {
            if (!uv.test(x, y)) continue;
            bool front_chart = x < tex / 2 + 2 && y >= tex / 2 - 2;
            (front_chart ? front : back) += 1;
        }
    }
    CHECK(front > 0);
    CHECK(back == 0);
}

TEST_CASE("merge: single view fills its mask, rest stays unassigned") {
    int tex = 16;
    UVMask mask = uniform_uvmask(tex, {{0, 8}}, 1.0f);
    PartitionMap part = merge_views({{mask, "mat_a"}}, full_occupancy(tex));
    CHECK(part.count_of(0) == 8 * 16);
    CHECK(part.count_of(kUnassigned) == 8 * 16);
    CHECK(part.legend == std::vector<std::string>{"mat_a"});
}

TEST_CASE("merge: majority vote per texel") {
    int tex = 8;
    UVMask a1 = uniform_uvmask(tex, {{0, 8}}, 1.0f, 0, 1);
    UVMask a2 = uniform_uvmask(tex, {{0, 8}}, 1.2f, 1, 1);
    UVMask b = uniform_uvmask(tex, {{0, 8}}, 0.5f, 2, 1);
    PartitionMap part =
        merge_views({{a1, "mat_a"}, {a2, "mat_a"}, {b, "mat_b"}}, full_occupancy(tex));
    int a_index = part.legend_index("mat_a");
    CHECK(part.count_of(a_index) == tex * tex);
}

TEST_CASE("merge: vote tie goes to the smaller depth") {
    int tex = 8;
    UVMask a = uniform_uvmask(tex, {{0, 8}}, 1.0f, 0, 1);
    UVMask b = uniform_uvmask(tex, {{0, 8}}, 2.0f, 1, 1);
    PartitionMap part = merge_views({{a, "away"}, {b, "near"}}, full_occupancy(tex));
    // rename: "away" has depth 1.0 (closer); check it wins
    int away_index = part.legend_index("away");
    CHECK(part.count_of(away_index) == tex * tex);
}

TEST_CASE("merge is invariant to input ordering") {
    int tex = 12;
    UVMask a = uniform_uvmask(tex, {{0, 7}}, 1.0f, 0, 1);
    UVMask b = uniform_uvmask(tex, {{5, 12}}, 2.0f, 1, 1);
    UVMask c = uniform_uvmask(tex, {{3, 9}}, 1.5f, 2, 1);
    PartitionMap p1 = merge_views({{a, "a"}, {b, "b"}, {c, "c"}}, full_occupancy(tex));
    PartitionMap p2 = merge_views({{c, "c"}, {a, "a"}, {b, "b"}}, full_occupancy(tex));
    CHECK(p1.material == p2.material);
    CHECK(p1.legend == p2.legend);
}

TEST_CASE("refine: no unassigned texels is the identity") {
    int tex = 8;
    UVMask all = uniform_uvmask(tex, {{0, 8}}, 1.0f);
    PartitionMap part = merge_views({{all, "only"}}, full_occupancy(tex));
    TextureMap diffuse(tex, tex, 3, ChannelRole::Diffuse, 0.5f);
    PartitionMap refined = refine_missing(part, diffuse, full_occupancy(tex));
    CHECK(refined.material == part.material);
}

TEST_CASE("refine: unassigned texels adopt the nearest mean color") {
    int tex = 16;
    // left quarter red material, right quarter blue material, middle empty
    UVMask red_mask = uniform_uvmask(tex, {{0, 4}}, 1.0f, 0, 1);
    UVMask blue_mask = uniform_uvmask(tex, {{12, 16}}, 1.0f, 1, 1);
    PartitionMap part =
        merge_views({{red_mask, "red_mat"}, {blue_mask, "blue_mat"}}, full_occupancy(tex));

    TextureMap diffuse(tex, tex, 3, ChannelRole::Diffuse);
    for (int y = 0; y < tex; ++y) {
        for (int x = 0; x < tex; ++x) {
            bool reddish = x < 10; // x in [4,10) is unassigned but red-colored
            diffuse.at(x, y, 0) = reddish ? 1.0f : 0.0f;
            diffuse.at(x, y, 2) = reddish ? 0.0f : 1.0f;
        }
    }
    PartitionMap refined = refine_missing(part, diffuse, full_occupancy(tex));
    CHECK(refined.count_of(kUnassigned) == 0);
    int red_index = refined.legend_index("red_mat");
    int blue_index = refined.legend_index("blue_mat");
    for (int y = 0; y < tex; ++y) {
        for (int x = 0; x < tex; ++x) {
            int expect = x < 10 ? red_index : blue_index;
            CHECK(refined.at(x, y) == expect);
        }
    }
}

TEST_CASE("refine: exact mean match lands on that material") {
    int tex = 8;
    UVMask a = uniform_uvmask(tex, {{0, 2}}, 1.0f, 0, 1);
    UVMask b = uniform_uvmask(tex, {{6, 8}}, 1.0f, 1, 1);
    TextureMap diffuse(tex, tex, 3, ChannelRole::Diffuse);
    for (int y = 0; y < tex; ++y)
        for (int x = 0; x < tex; ++x) {
            float v = x < 4 ? 0.25f : 0.75f;
            for (int c = 0; c < 3; ++c) diffuse.at(x, y, c) = v;
        }
    PartitionMap part = merge_views({{a, "low"}, {b, "high"}}, full_occupancy(tex));
    PartitionMap refined = refine_missing(part, diffuse, full_occupancy(tex));
    // texel colored exactly 0.25 goes to "low" whose mean is exactly 0.25
    CHECK(refined.at(3, 4) == refined.legend_index("low"));
    CHECK(refined.at(4, 4) == refined.legend_index("high"));
}

TEST_CASE("refine never assigns unoccupied texels and errors with nothing assigned") {
    int tex = 8;
    OccupancyGrid occupancy;
    occupancy.size = tex;
    occupancy.occupied.assign(size_t(tex) * tex, 0);
    for (int y = 0; y < tex; ++y)
        for (int x = 0; x < 4; ++x) occupancy.occupied[size_t(y) * tex + x] = 1;

    UVMask a = uniform_uvmask(tex, {{0, 2}}, 1.0f);
    PartitionMap part = merge_views({{a, "a"}}, occupancy);
    TextureMap diffuse(tex, tex, 3, ChannelRole::Diffuse, 0.3f);
    PartitionMap refined = refine_missing(part, diffuse, occupancy);
    CHECK(refined.count_of(kUnoccupied) == 8 * 4);
    CHECK(refined.count_of(kUnassigned) == 0);

    PartitionMap empty;
    empty.tex_size = tex;
    empty.material.assign(size_t(tex) * tex, kUnassigned);
    CHECK_THROWS_WITH_AS(refine_missing(empty, diffuse, occupancy),
                         doctest::Contains("NoAssignedRegions"), Error);
}

TEST_CASE("partition png + legend round trip") {
    int tex = 16;
    UVMask a = uniform_uvmask(tex, {{0, 6}}, 1.0f, 0, 1);
    UVMask b = uniform_uvmask(tex, {{6, 16}}, 1.0f, 1, 1);
    PartitionMap part = merge_views({{a, "alpha"}, {b, "beta"}}, full_occupancy(tex));

    auto dir = std::filesystem::temp_directory_path() / "matforge_test_partition";
    std::filesystem::remove_all(dir);
    save_partition(dir / "p.png", dir / "legend.json", part);
    PartitionMap back = load_partition(dir / "p.png", dir / "legend.json");
    CHECK(back.tex_size == part.tex_size);
    CHECK(back.legend == part.legend);
    CHECK(back.material == part.material);
}

TEST_CASE("uv-rectangle round trip on cube and sphere meets the 0.9 IoU bar") {
    struct Case {
        Mesh mesh;
        const char* name;
    };
    std::vector<Case> cases;
    cases.push_back({fixtures::make_cube(), "cube"});
    cases.push_back({fixtures::make_sphere(48, 24), "sphere"});

    for (auto& c : cases) {
        CAPTURE(c.name);
        int res = 256, tex = 256;
        // 45 deg elevation: both cube faces visible at equal sampling
        // density; a grazing view would starve one face of pixels
        auto cams = make_camera_ring(1, c.mesh, res, 0.7853982f);
        const Camera& cam = cams[0];
        TextureMap diffuse(tex, tex, 3, ChannelRole::Diffuse, 0.4f);
        RenderOutput render = rasterize(c.mesh, diffuse, cam);
        OccupancyGrid occupancy = build_occupancy(c.mesh, tex);

        RegionMask mask = full_foreground_mask(render.gbuffer);
        UVMask recovered = backproject_mask(mask, render.gbuffer, tex, occupancy);

        // ground truth: texel center -> covering face -> world -> visibility
        // (independent scan, no gbuffer uv involved)
        Vec3 back_axis = normalize(cam.eye - cam.target);
        Vec3 right = normalize(cross(cam.up, back_axis));
        Vec3 up = cross(back_axis, right);
        float fy = (cam.height * 0.5f) / std::tan(cam.fov_y * 0.5f);

        int64_t inter = 0, uni = 0;
        for (int ty = 0; ty < tex; ++ty) {
            for (int tx = 0; tx < tex; ++tx) {
                float u = (tx + 0.5f) / tex;
                float v = 1.0f - (ty + 0.5f) / tex;
                // find a face whose uv triangle contains (u,v)
                bool visible = false;
                for (size_t f = 0; f < c.mesh.faces.size() && !visible; ++f) {
                    const auto& face = c.mesh.faces[f];
                    Vec2 t0 = c.mesh.uvs[face[0].uv];
                    Vec2 t1 = c.mesh.uvs[face[1].uv];
                    Vec2 t2 = c.mesh.uvs[face[2].uv];
                    float area = (t1.x - t0.x) * (t2.y - t0.y) - (t1.y - t0.y) * (t2.x - t0.x);
                    if (area == 0.0f) continue;
                    float b0 = ((t1.x - u) * (t2.y - v) - (t1.y - v) * (t2.x - u)) / area;
                    float b1 = ((t2.x - u) * (t0.y - v) - (t2.y - v) * (t0.x - u)) / area;
                    float b2 = 1.0f - b0 - b1;
                    if (b0 < -1e-4f || b1 < -1e-4f || b2 < -1e-4f) continue;
                    Vec3 world = c.mesh.positions[face[0].position] * b0 +
                                 c.mesh.positions[face[1].position] * b1 +
                                 c.mesh.positions[face[2].position] * b2;
                    Vec3 rel = world - cam.eye;
                    Vec3 view{dot(rel, right), dot(rel, up), dot(rel, back_axis)};
                    if (view.z >= -cam.near_z) continue;
                    float sx = cam.width * 0.5f + fy * view.x / -view.z;
                    float sy = cam.height * 0.5f - fy * view.y / -view.z;
                    int px = int(sx), py = int(sy);
                    if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
                    // front-facing?
                    Vec3 n = cross(c.mesh.positions[face[1].position] - c.mesh.positions[face[0].position],
                                   c.mesh.positions[face[2].position] - c.mesh.positions[face[0].position]);
                    if (dot(n, cam.eye - world) <= 0.0f) continue;
                    // z-visible?
                    size_t pix = render.gbuffer.index(px, py);
                    float zbuf = render.gbuffer.depth[pix];
                    if (std::isfinite(zbuf) && -view.z <= zbuf * 1.01f) visible = true;
                }
                bool rec = recovered.test(tx, ty);
                inter += visible && rec;
                uni += visible || rec;
            }
        }
        double iou = uni ? double(inter) / double(uni) : 1.0;
        CAPTURE(iou);
        CHECK(iou >= 0.90);
    }
}
