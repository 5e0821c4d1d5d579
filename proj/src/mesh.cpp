#include "matforge/mesh.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace matforge {

namespace {

bool parse_float(std::string_view tok, float& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_int(std::string_view tok, int& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> toks;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) toks.push_back(line.substr(start, i - start));
    }
    return toks;
}

// OBJ index -> 0-based, resolving negatives against the running count.
int resolve_index(int raw, size_t count, int line_no, const char* what) {
    long idx = raw > 0 ? raw - 1 : long(count) + raw;
    if (idx < 0 || idx >= long(count))
        throw Error(ErrorCode::MalformedRecord,
                    std::string(what) + " index out of range at line " + std::to_string(line_no));
    return int(idx);
}

std::string format_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", double(v));
    return buf;
}

} // namespace

Mesh parse_obj(std::string_view text) {
    Mesh mesh;
    int line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        size_t end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos
                                                       ? std::string_view::npos
                                                       : end - start);
        start = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line[0] == '#') continue;

        auto toks = split_ws(line);
        if (toks.empty()) continue;
        std::string_view rec = toks[0];

        if (rec == "v") {
            if (toks.size() < 4)
                throw Error(ErrorCode::MalformedRecord, "short v record at line " + std::to_string(line_no));
            Vec3 p;
            if (!parse_float(toks[1], p.x) || !parse_float(toks[2], p.y) || !parse_float(toks[3], p.z))
                throw Error(ErrorCode::MalformedRecord, "bad v record at line " + std::to_string(line_no));
            mesh.positions.push_back(p);
        } else if (rec == "vt") {
            if (toks.size() < 3)
                throw Error(ErrorCode::MalformedRecord, "short vt record at line " + std::to_string(line_no));
            Vec2 uv;
            if (!parse_float(toks[1], uv.x) || !parse_float(toks[2], uv.y))
                throw Error(ErrorCode::MalformedRecord, "bad vt record at line " + std::to_string(line_no));
            uv.x = wrap_unit(uv.x);
            uv.y = wrap_unit(uv.y);
            mesh.uvs.push_back(uv);
        } else if (rec == "vn") {
            if (toks.size() < 4)
                throw Error(ErrorCode::MalformedRecord, "short vn record at line " + std::to_string(line_no));
            Vec3 n;
            if (!parse_float(toks[1], n.x) || !parse_float(toks[2], n.y) || !parse_float(toks[3], n.z))
                throw Error(ErrorCode::MalformedRecord, "bad vn record at line " + std::to_string(line_no));
            mesh.normals.push_back(n);
        } else if (rec == "f") {
            if (toks.size() < 4)
                throw Error(ErrorCode::MalformedRecord, "face with fewer than 3 corners at line " +
                                                            std::to_string(line_no));
            std::vector<FaceCorner> corners;
            corners.reserve(toks.size() - 1);
            for (size_t t = 1; t < toks.size(); ++t) {
                std::string_view part = toks[t];
                // forms: v, v/vt, v/vt/vn, v//vn
                size_t s1 = part.find('/');
                FaceCorner corner;
                int raw = 0;
                if (s1 == std::string_view::npos) {
                    throw Error(ErrorCode::MissingUVs,
                                "face corner lacks a vt index at line " + std::to_string(line_no));
                }
                if (!parse_int(part.substr(0, s1), raw))
                    throw Error(ErrorCode::MalformedRecord, "bad face index at line " + std::to_string(line_no));
                corner.position = resolve_index(raw, mesh.positions.size(), line_no, "position");
                size_t s2 = part.find('/', s1 + 1);
                std::string_view vt_tok = part.substr(s1 + 1, s2 == std::string_view::npos
                                                                  ? std::string_view::npos
                                                                  : s2 - s1 - 1);
                if (vt_tok.empty())
                    throw Error(ErrorCode::MissingUVs,
                                "face corner lacks a vt index at line " + std::to_string(line_no));
                if (!parse_int(vt_tok, raw))
                    throw Error(ErrorCode::MalformedRecord, "bad vt index at line " + std::to_string(line_no));
                corner.uv = resolve_index(raw, mesh.uvs.size(), line_no, "uv");
                if (s2 != std::string_view::npos && s2 + 1 < part.size()) {
                    if (!parse_int(part.substr(s2 + 1), raw))
                        throw Error(ErrorCode::MalformedRecord,
                                    "bad vn index at line " + std::to_string(line_no));
                    corner.normal = resolve_index(raw, mesh.normals.size(), line_no, "normal");
                }
                corners.push_back(corner);
            }
            // fan triangulation from the first corner
            for (size_t t = 1; t + 1 < corners.size(); ++t)
                mesh.faces.push_back({corners[0], corners[t], corners[t + 1]});
        }
        // o/g/s/usemtl/mtllib and anything else: ignored
    }
    if (mesh.faces.empty()) throw Error(ErrorCode::EmptyMesh, "OBJ contains no faces");
    return mesh;
}

Mesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_obj(ss.str());
}

std::string serialize_obj(const Mesh& mesh, const std::string& mtl_name) {
    std::string out;
    out.reserve(mesh.positions.size() * 32 + mesh.faces.size() * 24);
    if (!mtl_name.empty()) {
        out += "mtllib " + mtl_name + "\n";
        out += "usemtl material_0\n";
    }
    for (const Vec3& p : mesh.positions)
        out += "v " + format_float(p.x) + " " + format_float(p.y) + " " + format_float(p.z) + "\n";
    for (const Vec2& t : mesh.uvs)
        out += "vt " + format_float(t.x) + " " + format_float(t.y) + "\n";
    for (const Vec3& n : mesh.normals)
        out += "vn " + format_float(n.x) + " " + format_float(n.y) + " " + format_float(n.z) + "\n";
    for (const auto& face : mesh.faces) {
        out += "f";
        for (const FaceCorner& corner : face) {
            out += " " + std::to_string(corner.position + 1) + "/" + std::to_string(corner.uv + 1);
            if (corner.normal >= 0) out += "/" + std::to_string(corner.normal + 1);
        }
        out += "\n";
    }
    return out;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh, const std::string& mtl_name) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
    out << serialize_obj(mesh, mtl_name);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

BoundingSphere bounding_sphere(const Mesh& mesh) {
    if (mesh.positions.empty()) return {};
    Vec3 lo = mesh.positions[0], hi = mesh.positions[0];
    for (const Vec3& p : mesh.positions) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        lo.z = std::min(lo.z, p.z);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
        hi.z = std::max(hi.z, p.z);
    }
    BoundingSphere sphere;
    sphere.center = (lo + hi) * 0.5f;
    for (const Vec3& p : mesh.positions)
        sphere.radius = std::max(sphere.radius, length(p - sphere.center));
    return sphere;
}

BundleManifest export_bundle(const Mesh& mesh, const std::map<ChannelRole, TextureMap>& maps,
                             const std::filesystem::path& out_dir, const std::string& stem,
                             bool deep16) {
    if (!maps.empty()) {
        auto first = maps.begin();
        for (const auto& [role, img] : maps) {
            if (!img.same_size(first->second))
                throw Error(ErrorCode::IoFailure, "export_bundle: map resolutions differ");
        }
    }
    std::filesystem::create_directories(out_dir);

    BundleManifest manifest;
    manifest.mesh_file = stem + ".obj";
    std::string mtl_file = stem + ".mtl";

    save_obj(out_dir / manifest.mesh_file, mesh, mtl_file);

    // MTL keys per the common PBR extension set.
    static const std::map<ChannelRole, std::string> mtl_keys = {
        {ChannelRole::Diffuse, "map_Kd"},   {ChannelRole::Albedo, "map_Ka"},
        {ChannelRole::Normal, "norm"},      {ChannelRole::Roughness, "map_Pr"},
        {ChannelRole::Metalness, "map_Pm"}, {ChannelRole::Height, "disp"},
        {ChannelRole::Specular, "map_Ks"},
    };

    std::string mtl = "newmtl material_0\n";
    for (const auto& [role, img] : maps) {
        std::string filename = stem + "_" + role_name(role) + ".png";
        save_texture(out_dir / filename, img, deep16);
        manifest.maps[role_name(role)] = filename;
        mtl += mtl_keys.at(role) + " " + filename + "\n";
    }
    {
        std::ofstream out(out_dir / mtl_file, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + (out_dir / mtl_file).string());
        out << mtl;
    }
    {
        nlohmann::json j;
        j["mesh"] = manifest.mesh_file;
        j["maps"] = nlohmann::json::object();
        for (const auto& [role, file] : manifest.maps) j["maps"][role] = file;
        std::ofstream out(out_dir / (stem + ".manifest.json"), std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::IoFailure,
                        "cannot create " + (out_dir / (stem + ".manifest.json")).string());
        out << j.dump(2) << "\n";
    }
    return manifest;
}

} // namespace matforge
