#include "matforge/library.hpp"

#include <algorithm>
#include <fstream>

namespace matforge {

const std::vector<std::string>& major_type_names() {
    static const std::vector<std::string> names = {
        "ceramic", "concrete", "fabric",  "ground",  "leather", "marble", "metal",
        "misc",    "plaster",  "plastic", "stone",   "terracotta", "wood",
    };
    return names;
}

bool is_major_type(const std::string& name) {
    const auto& names = major_type_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

const TextureMap& MaterialRecord::key_diffuse() const {
    if (key_is_basecolor) return maps.at(ChannelRole::Albedo);
    return maps.at(ChannelRole::Diffuse);
}

const MaterialRecord& LibraryIndex::record(const std::string& id) const {
    auto it = records.find(id);
    if (it == records.end())
        throw Error(ErrorCode::MaterialMissing, "material '" + id + "' not in library");
    return it->second;
}

namespace {

float mean_luminance(const TextureMap& img) {
    double sum = 0.0;
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        if (img.channels == 3)
            sum += 0.2126 * img.data[i * 3] + 0.7152 * img.data[i * 3 + 1] +
                   0.0722 * img.data[i * 3 + 2];
        else
            sum += img.data[i];
    }
    return img.pixel_count() ? float(sum / double(img.pixel_count())) : 0.0f;
}

constexpr float kBlackDiffuseThreshold = 0.02f;

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorCode::MalformedRecord, path.string() + " is not valid JSON");
    return j;
}

} // namespace

MaterialRecord ingest_material(const std::filesystem::path& dir) {
    std::filesystem::path manifest_path = dir / "material.json";
    if (!std::filesystem::exists(manifest_path))
        throw Error(ErrorCode::MissingManifest, "no material.json in " + dir.string());
    nlohmann::json manifest = read_json_file(manifest_path);

    MaterialRecord rec;
    rec.dir = dir;
    rec.id = manifest.value("id", dir.filename().string());
    rec.major_type = manifest.value("major_type", "");
    rec.subcategory = manifest.value("subcategory", "");
    rec.caption = manifest.value("caption", "");
    if (!is_major_type(rec.major_type))
        throw Error(ErrorCode::UnknownMajorType,
                    "'" + rec.major_type + "' in " + manifest_path.string());

    // explicit map table, or <role>.png convention
    std::map<std::string, std::filesystem::path> files;
    if (manifest.contains("maps") && manifest["maps"].is_object()) {
        for (const auto& [role, file] : manifest["maps"].items())
            files[role] = dir / file.get<std::string>();
    } else {
        for (const char* name : {"diffuse", "basecolor", "albedo", "normal", "roughness",
                                 "metalness", "height", "specular"}) {
            std::filesystem::path p = dir / (std::string(name) + ".png");
            if (std::filesystem::exists(p)) files[name] = p;
        }
    }

    for (const auto& [name, path] : files) {
        ChannelRole role = role_from_name(name);
        if (rec.maps.count(role)) continue; // basecolor/albedo alias collision
        rec.maps.emplace(role, load_texture(path, role));
    }
    if (rec.maps.empty())
        throw Error(ErrorCode::NoDiffuseSource, "no maps found in " + dir.string());

    const TextureMap& first = rec.maps.begin()->second;
    for (const auto& [role, img] : rec.maps) {
        if (!img.same_size(first))
            throw Error(ErrorCode::ResolutionMismatch,
                        "maps in " + dir.string() + " have mixed resolutions");
    }

    bool has_diffuse = rec.maps.count(ChannelRole::Diffuse) != 0;
    bool has_basecolor = rec.maps.count(ChannelRole::Albedo) != 0;
    if (!has_diffuse && !has_basecolor)
        throw Error(ErrorCode::NoDiffuseSource,
                    dir.string() + " has neither diffuse nor basecolor");

    if (!has_diffuse) {
        rec.key_is_basecolor = true;
    } else if (mean_luminance(rec.maps.at(ChannelRole::Diffuse)) < kBlackDiffuseThreshold) {
        if (!has_basecolor)
            throw Error(ErrorCode::NoDiffuseSource,
                        dir.string() + " diffuse is black and no basecolor exists");
        rec.key_is_basecolor = true;
    }

    const TextureMap& key = rec.key_diffuse();
    double sum[3] = {0, 0, 0};
    for (size_t i = 0; i < key.pixel_count(); ++i)
        for (int c = 0; c < 3; ++c) sum[c] += key.data[i * 3 + c];
    for (int c = 0; c < 3; ++c)
        rec.mean_diffuse_rgb[c] = key.pixel_count() ? float(sum[c] / double(key.pixel_count())) : 0.0f;
    return rec;
}

LibraryIndex build_index(std::vector<MaterialRecord> records) {
    if (records.empty()) throw Error(ErrorCode::EmptyLibrary, "no material records");
    LibraryIndex index;
    for (MaterialRecord& rec : records) {
        if (!is_major_type(rec.major_type))
            throw Error(ErrorCode::UnknownMajorType, rec.major_type + " (" + rec.id + ")");
        if (index.records.count(rec.id))
            throw Error(ErrorCode::DuplicateId, rec.id);
        index.tree[rec.major_type][rec.subcategory].push_back(rec.id);
        index.records.emplace(rec.id, std::move(rec));
    }
    for (auto& [type, subtree] : index.tree)
        for (auto& [sub, ids] : subtree) std::sort(ids.begin(), ids.end());
    return index;
}

LibraryIndex load_library(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> dirs;
    std::filesystem::path manifest = root / "library.json";
    if (std::filesystem::exists(manifest)) {
        nlohmann::json j = read_json_file(manifest);
        for (const auto& entry : j.value("materials", nlohmann::json::array()))
            dirs.push_back(root / entry.get<std::string>());
    } else if (std::filesystem::is_directory(root)) {
        for (const auto& entry : std::filesystem::directory_iterator(root))
            if (entry.is_directory() && std::filesystem::exists(entry.path() / "material.json"))
                dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
    }
    if (dirs.empty())
        throw Error(ErrorCode::EmptyLibrary, "no materials under " + root.string());
    std::vector<MaterialRecord> records;
    records.reserve(dirs.size());
    for (const auto& dir : dirs) records.push_back(ingest_material(dir));
    return build_index(std::move(records));
}

std::vector<const MaterialRecord*> lookup(const LibraryIndex& index, const std::string& major_type,
                                          const std::string& subcategory) {
    auto type_it = index.tree.find(major_type);
    if (type_it == index.tree.end()) {
        if (!is_major_type(major_type))
            throw Error(ErrorCode::UnknownMajorType, major_type);
        throw Error(ErrorCode::UnknownMajorType, major_type + " has no materials");
    }
    std::vector<const MaterialRecord*> out;
    if (subcategory.empty()) {
        for (const auto& [sub, ids] : type_it->second)
            for (const std::string& id : ids) out.push_back(&index.records.at(id));
        return out;
    }
    auto sub_it = type_it->second.find(subcategory);
    if (sub_it == type_it->second.end())
        throw Error(ErrorCode::UnknownSubcategory, major_type + "/" + subcategory);
    for (const std::string& id : sub_it->second) out.push_back(&index.records.at(id));
    return out;
}

// ---------------------------------------------------------------------------
// Captioning
// ---------------------------------------------------------------------------

std::string caption_prompt_text(const std::string& subcategory, size_t image_count) {
    std::string prompt =
        "You are labeling material sphere photos of the '" + subcategory +
        "' subcategory. For each of the " + std::to_string(image_count) +
        " images, in order, write one dense caption of the material's appearance. "
        "Focus on color, pattern, roughness, metalness, embossing pattern, and material "
        "condition; call out subtle differences between the spheres. Do not describe the "
        "overall shape of the object or the sphere itself. "
        "Reply with JSON: {\"captions\": [\"...\", ...]} with exactly " +
        std::to_string(image_count) + " entries.";
    return prompt;
}

namespace {

std::vector<std::string> parse_captions(const MLLMResponse& resp, size_t expected) {
    if (!resp.parsed) return {};
    const nlohmann::json& j = *resp.parsed;
    if (!j.contains("captions") || !j["captions"].is_array()) return {};
    std::vector<std::string> captions;
    for (const auto& c : j["captions"])
        if (c.is_string()) captions.push_back(c.get<std::string>());
    if (captions.size() != expected) return {};
    return captions;
}

} // namespace

std::vector<std::string> caption_material(MllmClient& client,
                                          const std::vector<std::vector<uint8_t>>& sphere_pngs,
                                          const std::string& subcategory) {
    if (sphere_pngs.empty() || sphere_pngs.size() > 8)
        throw Error(ErrorCode::MalformedResponse, "caption batch must hold 1-8 images");

    PromptPayload payload;
    payload.system = "You write terse, information-dense captions of physical materials.";
    std::vector<PromptPart> turn;
    turn.push_back({caption_prompt_text(subcategory, sphere_pngs.size()), std::nullopt});
    for (const auto& png : sphere_pngs) {
        PromptPart part;
        part.image = ImagePart{png, "image/png"};
        turn.push_back(std::move(part));
    }
    payload.user_turns.push_back(std::move(turn));

    for (int attempt = 0; attempt < 2; ++attempt) {
        MLLMResponse resp = client.complete(payload);
        std::vector<std::string> captions = parse_captions(resp, sphere_pngs.size());
        if (!captions.empty()) return captions;
    }
    throw Error(ErrorCode::MalformedResponse,
                "caption count mismatch for subcategory " + subcategory);
}

void store_caption(const std::filesystem::path& material_dir, const std::string& caption) {
    std::filesystem::path path = material_dir / "material.json";
    nlohmann::json manifest = read_json_file(path);
    manifest["caption"] = caption;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot rewrite " + path.string());
    out << manifest.dump(2) << "\n";
}

} // namespace matforge
