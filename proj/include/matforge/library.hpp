#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "matforge/image.hpp"
#include "matforge/mllm.hpp"

namespace matforge {

// The 13 canonical major types (MatSynth naming).
const std::vector<std::string>& major_type_names();
bool is_major_type(const std::string& name);

struct MaterialRecord {
    std::string id;
    std::string major_type;
    std::string subcategory;
    std::string caption;
    std::filesystem::path dir;
    std::map<ChannelRole, TextureMap> maps;
    float mean_diffuse_rgb[3] = {0, 0, 0};
    bool key_is_basecolor = false; // diffuse was dark/missing, basecolor substituted
    bool tileable = true;

    const TextureMap& key_diffuse() const;
    bool has_map(ChannelRole role) const { return maps.count(role) != 0; }
};

struct LibraryIndex {
    // major type -> subcategory -> material ids (sorted)
    std::map<std::string, std::map<std::string, std::vector<std::string>>> tree;
    std::map<std::string, MaterialRecord> records;

    const MaterialRecord& record(const std::string& id) const;
    bool has(const std::string& id) const { return records.count(id) != 0; }
    size_t size() const { return records.size(); }
};

// Directory with material.json {id, major_type, subcategory, caption,
// maps:{role:file}} (or <role>.png files by convention). Key diffuse falls
// back to basecolor when the diffuse is missing or nearly black.
MaterialRecord ingest_material(const std::filesystem::path& dir);

LibraryIndex build_index(std::vector<MaterialRecord> records);

// Loads every material listed by <root>/library.json, or every subdirectory
// with a material.json when the root manifest is absent.
LibraryIndex load_library(const std::filesystem::path& root);

std::vector<const MaterialRecord*> lookup(const LibraryIndex& index, const std::string& major_type,
                                          const std::string& subcategory = {});

// Captions 1-8 material sphere renders of one subcategory through the client.
// Prompt steers toward color/pattern/roughness/metalness/embossing/condition
// and away from object shape. One retry on a count mismatch.
std::vector<std::string> caption_material(MllmClient& client,
                                          const std::vector<std::vector<uint8_t>>& sphere_pngs,
                                          const std::string& subcategory);

// Exposed so tests can assert prompt contents.
std::string caption_prompt_text(const std::string& subcategory, size_t image_count);

// Rewrites caption fields inside each material dir's material.json.
void store_caption(const std::filesystem::path& material_dir, const std::string& caption);

} // namespace matforge
