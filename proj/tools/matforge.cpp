#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iostream>

#include "matforge/estimator.hpp"
#include "matforge/fixtures.hpp"
#include "matforge/kernels.hpp"
#include "matforge/library.hpp"
#include "matforge/pipeline.hpp"
#include "matforge/render.hpp"

namespace {

using matforge::Error;
using matforge::PipelineConfig;

struct CommonFlags {
    std::string config_path;
    int views = -1;
    int resolution = -1;
    std::string matcher;
    std::string masks;
    std::string out_dir;
    std::string replay_log;
    bool dump_gbuffer = false;
    bool dump_partition = false;
    bool deep = false;
    bool top_view = false;
    int64_t seed = -1;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("-c,--config", flags.config_path, "pipeline config JSON")->required();
    cmd->add_option("--views", flags.views, "number of ring views");
    cmd->add_option("--res", flags.resolution, "render resolution in pixels");
    cmd->add_option("--matcher", flags.matcher, "offline|mllm|replay");
    cmd->add_option("--masks", flags.masks, "mask directory or 'fallback'");
    cmd->add_option("--out", flags.out_dir, "output directory override");
    cmd->add_option("--replay-log", flags.replay_log, "session log for matcher=replay");
    cmd->add_option("--seed", flags.seed, "deterministic seed");
    cmd->add_flag("--dump-gbuffer", flags.dump_gbuffer, "write G-buffer debug channels");
    cmd->add_flag("--dump-partition", flags.dump_partition, "write partition debug view");
    cmd->add_flag("--deep", flags.deep, "16-bit PNG outputs");
    cmd->add_flag("--top-view", flags.top_view, "add a fourth top-down view");
}

PipelineConfig resolve_config(const CommonFlags& flags) {
    PipelineConfig cfg = matforge::load_config(flags.config_path);
    if (flags.views > 0) cfg.views = flags.views;
    if (flags.resolution > 0) cfg.resolution = flags.resolution;
    if (!flags.matcher.empty()) cfg.matcher = flags.matcher;
    if (!flags.masks.empty()) cfg.mask_source = flags.masks;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.replay_log.empty()) cfg.replay_log = flags.replay_log;
    if (flags.seed >= 0) {
        cfg.seed = uint32_t(flags.seed);
        cfg.seg.seed = cfg.seed;
    }
    cfg.dump_gbuffer |= flags.dump_gbuffer;
    cfg.dump_partition |= flags.dump_partition;
    cfg.deep16 |= flags.deep;
    cfg.top_view |= flags.top_view;
    matforge::validate_config(cfg);
    return cfg;
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return matforge::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffuse-only mesh -> SVBRDF map pipeline"};
    app.require_subcommand(1);

    // run
    CommonFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "execute the full pipeline");
    add_common_flags(run, run_flags);

    // stage
    CommonFlags stage_flags;
    std::string stage_name;
    CLI::App* stage = app.add_subcommand("stage", "execute one pipeline stage");
    stage->add_option("name", stage_name, "render|segment|match|partition|estimate|export")
        ->required();
    add_common_flags(stage, stage_flags);

    // library ingest
    std::string ingest_dir;
    CLI::App* library = app.add_subcommand("library", "material library management");
    library->require_subcommand(1);
    CLI::App* ingest = library->add_subcommand("ingest", "validate and summarize a library");
    ingest->add_option("dir", ingest_dir, "library root")->required();

    // library caption
    std::string caption_dir;
    CLI::App* caption = library->add_subcommand(
        "caption", "caption material sphere renders through the MLLM endpoint");
    caption->add_option("dir", caption_dir, "library root")->required();

    // fixtures
    std::string fixtures_dir;
    CLI::App* fixtures = app.add_subcommand("fixtures", "write the toy library and demo assets");
    fixtures->add_option("dir", fixtures_dir, "destination directory")->required();

    // preview
    std::string preview_out;
    CommonFlags preview_flags;
    CLI::App* preview = app.add_subcommand("preview", "Cook-Torrance preview of a finished run");
    add_common_flags(preview, preview_flags);
    preview->add_option("--preview-out", preview_out, "preview image path");

    CLI11_PARSE(app, argc, argv);

    if (*run) {
        return guarded([&] {
            PipelineConfig cfg = resolve_config(run_flags);
            matforge::run_pipeline(cfg);
            std::cout << "pipeline complete -> " << cfg.out_dir.string() << "\n";
        });
    }
    if (*stage) {
        return guarded([&] {
            PipelineConfig cfg = resolve_config(stage_flags);
            if (std::find(matforge::kStageNames.begin(), matforge::kStageNames.end(),
                          stage_name) == matforge::kStageNames.end())
                throw Error(matforge::ErrorCode::ConfigError, "unknown stage '" + stage_name + "'");
            matforge::run_stage(stage_name, cfg);
            std::cout << "stage " << stage_name << " complete\n";
        });
    }
    if (*ingest) {
        return guarded([&] {
            matforge::LibraryIndex index = matforge::load_library(ingest_dir);
            std::cout << index.size() << " materials\n";
            for (const auto& [type, subtree] : index.tree) {
                size_t n = 0;
                for (const auto& [sub, ids] : subtree) n += ids.size();
                std::cout << "  " << type << ": " << n << " across " << subtree.size()
                          << " subcategories\n";
            }
        });
    }
    if (*caption) {
        return guarded([&] {
            const char* key = std::getenv("MLLM_API_KEY");
            if (!key || !*key)
                throw Error(matforge::ErrorCode::AuthError, "captioning requires MLLM_API_KEY");
            const char* url = std::getenv("MLLM_BASE_URL");
            const char* model = std::getenv("MLLM_MODEL");
            matforge::MllmClient client(
                std::make_unique<matforge::HttpTransport>(
                    url && *url ? url : "https://api.openai.com/v1", key,
                    model && *model ? model : "gpt-4o"),
                std::filesystem::path(caption_dir) / "caption_session.jsonl");

            // batch per subcategory: sphere image = the key diffuse itself
            matforge::LibraryIndex index = matforge::load_library(caption_dir);
            for (const auto& [type, subtree] : index.tree) {
                for (const auto& [sub, ids] : subtree) {
                    std::vector<std::vector<uint8_t>> images;
                    for (const std::string& id : ids)
                        images.push_back(
                            matforge::encode_png8(index.record(id).key_diffuse()));
                    std::vector<std::string> captions =
                        matforge::caption_material(client, images, sub);
                    for (size_t i = 0; i < ids.size(); ++i)
                        matforge::store_caption(index.record(ids[i]).dir, captions[i]);
                    std::cout << type << "/" << sub << ": " << captions.size() << " captions\n";
                }
            }
        });
    }
    if (*fixtures) {
        return guarded([&] {
            std::filesystem::path root(fixtures_dir);
            int n = matforge::fixtures::write_toy_library(root / "toy_library");
            matforge::fixtures::write_demo_assets(root / "assets");
            std::cout << "wrote " << n << " toy materials and demo assets under " << root.string()
                      << "\n";
        });
    }
    if (*preview) {
        return guarded([&] {
            PipelineConfig cfg = resolve_config(preview_flags);
            matforge::Mesh mesh = matforge::load_obj(cfg.mesh);
            matforge::TextureMap diffuse =
                matforge::load_texture(cfg.diffuse, matforge::ChannelRole::Diffuse);
            std::string stem = cfg.mesh.stem().string();
            matforge::SVBRDFSet svbrdf;
            for (auto role : {matforge::ChannelRole::Normal, matforge::ChannelRole::Roughness,
                              matforge::ChannelRole::Metalness, matforge::ChannelRole::Height,
                              matforge::ChannelRole::Specular}) {
                std::filesystem::path p =
                    cfg.out_dir / "maps" / (stem + "_" + matforge::role_name(role) + ".png");
                svbrdf.maps.emplace(role, matforge::load_texture(p, role));
            }
            std::vector<matforge::Camera> cams = matforge::make_camera_ring(
                1, mesh, cfg.resolution, cfg.elevation, cfg.fov_y);
            matforge::TextureMap img = matforge::shade_preview(
                mesh, diffuse, svbrdf, cams[0], matforge::Vec3{-0.5f, -0.7f, -0.5f});
            std::filesystem::path out = preview_out.empty()
                                            ? cfg.out_dir / "preview.png"
                                            : std::filesystem::path(preview_out);
            matforge::write_png8(out, img);
            std::cout << "preview -> " << out.string() << "\n";
        });
    }
    return 0;
}
