#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "matforge/mllm.hpp"
#include "matforge/seg.hpp"

namespace matforge {

struct PipelineConfig {
    std::filesystem::path mesh;
    std::filesystem::path diffuse;
    std::filesystem::path library_root;
    std::filesystem::path out_dir;
    int views = 3;
    int resolution = 512;
    std::string matcher = "offline";      // offline | mllm | replay
    std::string mask_source = "fallback"; // "fallback" or a mask directory
    std::filesystem::path replay_log;     // matcher=replay input
    bool dump_gbuffer = false;
    bool dump_partition = false;
    bool deep16 = false;
    bool top_view = false;
    uint32_t seed = 7;
    float elevation = 0.34906585f; // 20 deg
    float fov_y = 0.785398163f;    // 45 deg
    std::string object_hint;
    SegParams seg;

    // live endpoint settings, resolved from MLLM_* env vars at validation
    std::string mllm_base_url;
    std::string mllm_api_key;
    std::string mllm_model;

    // test seam: when set and matcher == "mllm", this builds the transport
    // instead of HttpTransport
    std::function<std::unique_ptr<Transport>()> transport_factory;
};

// Flat JSON file; unknown keys rejected so typos surface as config errors.
PipelineConfig load_config(const std::filesystem::path& path);

// Path existence, matcher prerequisites (mllm needs env or factory, replay
// needs the log), bounds. Throws ConfigError / AuthError.
void validate_config(PipelineConfig& cfg);

extern const std::vector<std::string> kStageNames; // render segment match partition estimate export

// Runs one stage against the artifact directory. Throws
// MissingPriorArtifact when an upstream output is absent.
void run_stage(const std::string& stage, const PipelineConfig& cfg);

struct RunManifest {
    nlohmann::json json;
};

// All stages in order + run_manifest.json. Returns the manifest.
RunManifest run_pipeline(const PipelineConfig& cfg);

// Maps an Error to the CLI exit code contract (0 ok, 2 config, 3 stage,
// 4 auth/transport).
int exit_code_for(const Error& e);

} // namespace matforge
