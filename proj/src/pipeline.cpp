#include "matforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include "matforge/estimator.hpp"
#include "matforge/library.hpp"
#include "matforge/matcher.hpp"
#include "matforge/mesh.hpp"
#include "matforge/partition.hpp"
#include "matforge/render.hpp"

namespace matforge {

const std::vector<std::string> kStageNames = {"render",    "segment",  "match",
                                              "partition", "estimate", "export"};

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::ConfigError: return 2;
        case ErrorCode::AuthError:
        case ErrorCode::RateLimited:
        case ErrorCode::TransportError: return 4;
        default: return 3;
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw Error(ErrorCode::ConfigError, path.string() + " is not valid JSON");

    static const std::vector<std::string> known = {
        "mesh",           "diffuse",    "library",   "out_dir",   "views",
        "resolution",     "matcher",    "masks",     "replay_log", "dump_gbuffer",
        "dump_partition", "deep",       "top_view",  "seed",      "elevation_deg",
        "fov_deg",        "object_hint", "k_max",    "elbow",     "merge_fraction",
        "dust_fraction",
    };
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }

    std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    PipelineConfig cfg;
    if (j.contains("mesh")) cfg.mesh = resolve(j["mesh"].get<std::string>());
    if (j.contains("diffuse")) cfg.diffuse = resolve(j["diffuse"].get<std::string>());
    if (j.contains("library")) cfg.library_root = resolve(j["library"].get<std::string>());
    if (j.contains("out_dir")) cfg.out_dir = resolve(j["out_dir"].get<std::string>());
    cfg.views = j.value("views", cfg.views);
    cfg.resolution = j.value("resolution", cfg.resolution);
    cfg.matcher = j.value("matcher", cfg.matcher);
    cfg.mask_source = j.value("masks", cfg.mask_source);
    if (cfg.mask_source != "fallback") cfg.mask_source = resolve(cfg.mask_source).string();
    if (j.contains("replay_log")) cfg.replay_log = resolve(j["replay_log"].get<std::string>());
    cfg.dump_gbuffer = j.value("dump_gbuffer", false);
    cfg.dump_partition = j.value("dump_partition", false);
    cfg.deep16 = j.value("deep", false);
    cfg.top_view = j.value("top_view", false);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("elevation_deg"))
        cfg.elevation = j["elevation_deg"].get<float>() * 3.14159265f / 180.0f;
    if (j.contains("fov_deg")) cfg.fov_y = j["fov_deg"].get<float>() * 3.14159265f / 180.0f;
    cfg.object_hint = j.value("object_hint", "");
    cfg.seg.k_max = j.value("k_max", cfg.seg.k_max);
    cfg.seg.seed = cfg.seed;
    cfg.seg.elbow_threshold = j.value("elbow", cfg.seg.elbow_threshold);
    cfg.seg.merge_fraction = j.value("merge_fraction", cfg.seg.merge_fraction);
    cfg.seg.dust_fraction = j.value("dust_fraction", cfg.seg.dust_fraction);
    return cfg;
}

void validate_config(PipelineConfig& cfg) {
    if (cfg.views < 1) throw Error(ErrorCode::ConfigError, "views must be >= 1");
    if (cfg.resolution < 16) throw Error(ErrorCode::ConfigError, "resolution must be >= 16");
    if (cfg.matcher != "offline" && cfg.matcher != "mllm" && cfg.matcher != "replay")
        throw Error(ErrorCode::ConfigError, "matcher must be offline|mllm|replay");
    if (cfg.mesh.empty() || !std::filesystem::exists(cfg.mesh))
        throw Error(ErrorCode::ConfigError, "mesh path missing: " + cfg.mesh.string());
    if (cfg.diffuse.empty() || !std::filesystem::exists(cfg.diffuse))
        throw Error(ErrorCode::ConfigError, "diffuse path missing: " + cfg.diffuse.string());
    if (cfg.library_root.empty() || !std::filesystem::exists(cfg.library_root))
        throw Error(ErrorCode::ConfigError, "library path missing: " + cfg.library_root.string());
    if (cfg.out_dir.empty()) throw Error(ErrorCode::ConfigError, "out_dir not set");
    if (cfg.mask_source != "fallback" && !std::filesystem::is_directory(cfg.mask_source))
        throw Error(ErrorCode::ConfigError, "mask dir missing: " + cfg.mask_source);
    if (cfg.matcher == "replay" &&
        (cfg.replay_log.empty() || !std::filesystem::exists(cfg.replay_log)))
        throw Error(ErrorCode::ConfigError, "replay_log missing");
    if (cfg.matcher == "mllm" && !cfg.transport_factory) {
        const char* key = std::getenv("MLLM_API_KEY");
        const char* url = std::getenv("MLLM_BASE_URL");
        const char* model = std::getenv("MLLM_MODEL");
        if (!key || !*key)
            throw Error(ErrorCode::AuthError, "matcher=mllm requires MLLM_API_KEY");
        cfg.mllm_api_key = key;
        cfg.mllm_base_url = url && *url ? url : "https://api.openai.com/v1";
        cfg.mllm_model = model && *model ? model : "gpt-4o";
    }
}

// ---------------------------------------------------------------------------
// Stage plumbing
// ---------------------------------------------------------------------------

namespace {

int view_count(const PipelineConfig& cfg) { return cfg.views + (cfg.top_view ? 1 : 0); }

std::filesystem::path view_color_path(const PipelineConfig& cfg, int v) {
    return cfg.out_dir / "views" / ("view" + std::to_string(v) + "_color.png");
}
std::filesystem::path view_gbuf_path(const PipelineConfig& cfg, int v) {
    return cfg.out_dir / "views" / ("view" + std::to_string(v) + ".gbuf");
}
std::filesystem::path annotated_path(const PipelineConfig& cfg, int v) {
    return cfg.out_dir / "annotated" / ("view" + std::to_string(v) + "_annotated.png");
}

void require_artifact(const std::filesystem::path& p, const std::string& producing_stage) {
    if (!std::filesystem::exists(p))
        throw Error(ErrorCode::MissingPriorArtifact,
                    p.string() + " (run the '" + producing_stage + "' stage first)");
}

RenderOutput load_view(const PipelineConfig& cfg, int v) {
    require_artifact(view_color_path(cfg, v), "render");
    require_artifact(view_gbuf_path(cfg, v), "render");
    RenderOutput render;
    render.color = load_texture(view_color_path(cfg, v), ChannelRole::Diffuse);
    render.gbuffer = load_gbuffer(view_gbuf_path(cfg, v));
    return render;
}

std::vector<uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + p.string());
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
}

void stage_render(const PipelineConfig& cfg) {
    Mesh mesh = load_obj(cfg.mesh);
    TextureMap diffuse = load_texture(cfg.diffuse, ChannelRole::Diffuse);
    std::vector<Camera> cams = make_camera_ring(cfg.views, mesh, cfg.resolution, cfg.elevation,
                                                cfg.fov_y, 0.8f, cfg.top_view);
    for (size_t v = 0; v < cams.size(); ++v) {
        RenderOutput render = rasterize(mesh, diffuse, cams[v]);
        write_png8(view_color_path(cfg, int(v)), render.color);
        save_gbuffer(view_gbuf_path(cfg, int(v)), render.gbuffer);
        if (cfg.dump_gbuffer)
            dump_gbuffer_debug(cfg.out_dir / "gbuffer_debug", "view" + std::to_string(v),
                               render.gbuffer);
    }
}

void stage_segment(const PipelineConfig& cfg) {
    nlohmann::json regions_json;
    regions_json["views"] = nlohmann::json::array();
    std::filesystem::create_directories(cfg.out_dir / "masks");

    for (int v = 0; v < view_count(cfg); ++v) {
        RenderOutput render = load_view(cfg, v);
        std::vector<RegionMask> masks;
        if (cfg.mask_source == "fallback") {
            masks = fallback_segment(render, cfg.seg.k_max, cfg.seg);
            for (RegionMask& m : masks) m.view_id = v;
        } else {
            masks = load_masks(cfg.mask_source, v, render);
        }
        masks = filter_masks(std::move(masks), cfg.seg);
        for (RegionMask& m : masks) recompute_mask_stats(m, render.color);

        AnnotatedImage annotated = annotate_som(render, masks);
        write_png8(annotated_path(cfg, v), annotated.image);

        nlohmann::json view_json;
        view_json["view"] = v;
        view_json["regions"] = nlohmann::json::array();
        for (const RegionMask& m : masks) {
            TextureMap mask_img(m.width, m.height, 1, ChannelRole::Roughness);
            for (size_t i = 0; i < m.mask.size(); ++i) mask_img.data[i] = m.mask[i] ? 1.0f : 0.0f;
            write_png8(cfg.out_dir / "masks" /
                           ("view" + std::to_string(v) + "_region" + std::to_string(m.label) + ".png"),
                       mask_img);
            view_json["regions"].push_back({{"label", m.label},
                                            {"pixel_count", m.pixel_count},
                                            {"mean_rgb",
                                             {m.mean_diffuse_rgb[0], m.mean_diffuse_rgb[1],
                                              m.mean_diffuse_rgb[2]}}});
        }
        regions_json["views"].push_back(view_json);
    }
    std::ofstream out(cfg.out_dir / "segment_regions.json", std::ios::trunc);
    out << regions_json.dump(2) << "\n";
}

std::unique_ptr<MllmClient> make_client(const PipelineConfig& cfg) {
    if (cfg.matcher == "replay") {
        return std::make_unique<MllmClient>(std::make_unique<ReplayTransport>(cfg.replay_log));
    }
    std::unique_ptr<Transport> transport;
    if (cfg.transport_factory)
        transport = cfg.transport_factory();
    else
        transport = std::make_unique<HttpTransport>(cfg.mllm_base_url, cfg.mllm_api_key,
                                                    cfg.mllm_model);
    return std::make_unique<MllmClient>(std::move(transport),
                                        cfg.out_dir / "mllm_session.jsonl");
}

void stage_match(const PipelineConfig& cfg) {
    require_artifact(cfg.out_dir / "segment_regions.json", "segment");
    LibraryIndex lib = load_library(cfg.library_root);

    std::unique_ptr<MllmClient> client;
    if (cfg.matcher != "offline") client = make_client(cfg);

    nlohmann::json report;
    report["matcher"] = cfg.matcher;
    report["regions"] = nlohmann::json::array();

    for (int v = 0; v < view_count(cfg); ++v) {
        RenderOutput render = load_view(cfg, v);
        std::vector<RegionMask> masks = load_masks(cfg.out_dir / "masks", v, render);

        std::vector<MatchResult> results;
        if (cfg.matcher == "offline") {
            for (const RegionMask& m : masks) results.push_back(match_region_offline(m, lib));
        } else {
            require_artifact(annotated_path(cfg, v), "segment");
            std::vector<uint8_t> annotated_png = read_bytes(annotated_path(cfg, v));
            results = match_regions_mllm(*client, annotated_png, masks, lib, cfg.object_hint);
        }
        for (const MatchResult& r : results) {
            nlohmann::json trace = nlohmann::json::array();
            for (const DescentStep& step : r.trace)
                trace.push_back({{"level", step.prompt_kind},
                                 {"chosen", step.chosen},
                                 {"raw_response", step.raw_response}});
            report["regions"].push_back({{"view", r.view_id},
                                         {"label", r.label},
                                         {"material_id", r.material_id},
                                         {"source", match_source_name(r.source)},
                                         {"trace", trace}});
        }
    }
    std::ofstream out(cfg.out_dir / "match_report.json", std::ios::trunc);
    out << report.dump(2) << "\n";
}

void stage_partition(const PipelineConfig& cfg) {
    require_artifact(cfg.out_dir / "match_report.json", "match");
    Mesh mesh = load_obj(cfg.mesh);
    TextureMap diffuse = load_texture(cfg.diffuse, ChannelRole::Diffuse);
    int tex_size = diffuse.width;
    if (diffuse.height != tex_size)
        throw Error(ErrorCode::ConfigError, "diffuse texture must be square");

    OccupancyGrid occupancy = build_occupancy(mesh, tex_size);

    nlohmann::json report;
    {
        std::ifstream in(cfg.out_dir / "match_report.json");
        report = nlohmann::json::parse(in);
    }
    std::vector<MatchResult> results;
    for (const auto& r : report["regions"]) {
        MatchResult m;
        m.view_id = r["view"].get<int>();
        m.label = r["label"].get<int>();
        m.material_id = r["material_id"].get<std::string>();
        results.push_back(std::move(m));
    }

    // back-project every region mask
    std::vector<UvFootprint> footprints;
    std::vector<std::pair<UVMask, std::string>> labeled;
    std::map<std::pair<int, int>, UVMask> uv_masks;
    for (int v = 0; v < view_count(cfg); ++v) {
        RenderOutput render = load_view(cfg, v);
        std::vector<RegionMask> masks = load_masks(cfg.out_dir / "masks", v, render);
        for (const RegionMask& m : masks) {
            UVMask uv = backproject_mask(m, render.gbuffer, tex_size, occupancy);
            UvFootprint fp;
            fp.view_id = v;
            fp.label = m.label;
            fp.texels = uv.texels;
            fp.texel_count = uv.texel_count;
            footprints.push_back(std::move(fp));
            uv_masks.emplace(std::make_pair(v, m.label), std::move(uv));
        }
    }

    results = reconcile_cross_view(std::move(results), footprints);

    for (const MatchResult& r : results) {
        auto it = uv_masks.find({r.view_id, r.label});
        if (it == uv_masks.end())
            throw Error(ErrorCode::MissingPriorArtifact,
                        "match report names view" + std::to_string(r.view_id) + "_region" +
                            std::to_string(r.label) + " but no mask exists");
        labeled.emplace_back(it->second, r.material_id);
    }

    PartitionMap part = merge_views(labeled, occupancy);
    part = refine_missing(std::move(part), diffuse, occupancy);

    save_partition(cfg.out_dir / "partition" / "partition.png",
                   cfg.out_dir / "partition" / "partition_legend.json", part);

    nlohmann::json reconciled = nlohmann::json::array();
    for (const MatchResult& r : results)
        reconciled.push_back(
            {{"view", r.view_id}, {"label", r.label}, {"material_id", r.material_id}});
    std::ofstream out(cfg.out_dir / "partition" / "reconciled.json", std::ios::trunc);
    out << reconciled.dump(2) << "\n";
}

void stage_estimate(const PipelineConfig& cfg) {
    require_artifact(cfg.out_dir / "partition" / "partition.png", "partition");
    require_artifact(cfg.out_dir / "partition" / "partition_legend.json", "partition");
    TextureMap diffuse = load_texture(cfg.diffuse, ChannelRole::Diffuse);
    LibraryIndex lib = load_library(cfg.library_root);
    PartitionMap part = load_partition(cfg.out_dir / "partition" / "partition.png",
                                       cfg.out_dir / "partition" / "partition_legend.json");

    SVBRDFSet svbrdf = estimate(diffuse, part, lib);
    std::string stem = cfg.mesh.stem().string();
    for (const auto& [role, img] : svbrdf.maps)
        save_texture(cfg.out_dir / "maps" / (stem + "_" + role_name(role) + ".png"), img,
                     cfg.deep16);
}

void stage_export(const PipelineConfig& cfg) {
    std::string stem = cfg.mesh.stem().string();
    std::map<ChannelRole, TextureMap> maps;
    for (ChannelRole role : {ChannelRole::Normal, ChannelRole::Roughness, ChannelRole::Metalness,
                             ChannelRole::Height, ChannelRole::Specular}) {
        std::filesystem::path p = cfg.out_dir / "maps" / (stem + "_" + role_name(role) + ".png");
        require_artifact(p, "estimate");
        maps.emplace(role, load_texture(p, role));
    }
    // diffuse rides along so the bundle is self-contained
    maps.emplace(ChannelRole::Diffuse, load_texture(cfg.diffuse, ChannelRole::Diffuse));
    Mesh mesh = load_obj(cfg.mesh);
    export_bundle(mesh, maps, cfg.out_dir / "export", stem, cfg.deep16);
}

} // namespace

void run_stage(const std::string& stage, const PipelineConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    if (stage == "render")
        stage_render(cfg);
    else if (stage == "segment")
        stage_segment(cfg);
    else if (stage == "match")
        stage_match(cfg);
    else if (stage == "partition")
        stage_partition(cfg);
    else if (stage == "estimate")
        stage_estimate(cfg);
    else if (stage == "export")
        stage_export(cfg);
    else
        throw Error(ErrorCode::ConfigError, "unknown stage '" + stage + "'");
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
    RunManifest manifest;
    manifest.json["stages"] = nlohmann::json::array();

    for (const std::string& stage : kStageNames) {
        auto start = std::chrono::steady_clock::now();
        run_stage(stage, cfg);
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        manifest.json["stages"].push_back({{"name", stage}, {"seconds", seconds}});
    }

    // region/material table from the reconciled report
    std::filesystem::path reconciled_path = cfg.out_dir / "partition" / "reconciled.json";
    if (std::filesystem::exists(reconciled_path)) {
        std::ifstream in(reconciled_path);
        manifest.json["regions"] = nlohmann::json::parse(in);
    }
    manifest.json["out_dir"] = cfg.out_dir.string();
    manifest.json["matcher"] = cfg.matcher;
    manifest.json["views"] = view_count(cfg);
    manifest.json["resolution"] = cfg.resolution;
    manifest.json["seed"] = cfg.seed;

    std::ofstream out(cfg.out_dir / "run_manifest.json", std::ios::trunc);
    out << manifest.json.dump(2) << "\n";
    return manifest;
}

} // namespace matforge
