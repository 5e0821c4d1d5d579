#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matforge/geom.hpp"
#include "matforge/image.hpp"

namespace matforge {

struct FaceCorner {
    int position = -1;
    int uv = -1;
    int normal = -1; // optional, -1 when absent
};

struct Mesh {
    std::vector<Vec3> positions;
    std::vector<Vec2> uvs; // wrapped into [0,1] at load
    std::vector<Vec3> normals;
    std::vector<std::array<FaceCorner, 3>> faces;

    size_t face_count() const { return faces.size(); }
};

// Wavefront OBJ with v/vt[/vn] faces. Polygons fan-triangulate from the first
// corner; negative indices resolve against the counts seen so far.
Mesh parse_obj(std::string_view text);
Mesh load_obj(const std::filesystem::path& path);

std::string serialize_obj(const Mesh& mesh, const std::string& mtl_name = {});
void save_obj(const std::filesystem::path& path, const Mesh& mesh,
              const std::string& mtl_name = {});

// Mesh bounding sphere (center of the AABB, max vertex distance).
struct BoundingSphere {
    Vec3 center;
    float radius = 0.0f;
};
BoundingSphere bounding_sphere(const Mesh& mesh);

// Final packaging: mesh copy + one PNG per map role + extended MTL + JSON
// manifest { "mesh": str, "maps": {role: filename} }.
struct BundleManifest {
    std::string mesh_file;
    std::map<std::string, std::string> maps; // role name -> filename
};

BundleManifest export_bundle(const Mesh& mesh,
                             const std::map<ChannelRole, TextureMap>& maps,
                             const std::filesystem::path& out_dir,
                             const std::string& stem, bool deep16 = false);

} // namespace matforge
