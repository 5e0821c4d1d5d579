#pragma once

#include <stdexcept>
#include <string>

namespace matforge {

enum class ErrorCode {
    // mesh / texture io
    MissingUVs,
    MalformedRecord,
    EmptyMesh,
    UnsupportedFormat,
    ChannelMismatch,
    IoFailure,
    // render
    DegenerateMesh,
    MissingChannel,
    // segmentation
    ResolutionMismatch,
    NoMasksFound,
    // library
    MissingManifest,
    NoDiffuseSource,
    UnknownMajorType,
    UnknownSubcategory,
    DuplicateId,
    // mllm client
    AuthError,
    RateLimited,
    TransportError,
    MalformedResponse,
    NoValidChoice,
    // matcher
    MatchFailure,
    EmptyLibrary,
    // partition / estimator
    NoAssignedRegions,
    MaterialMissing,
    UnassignedTexels,
    // cli
    ConfigError,
    MissingPriorArtifact,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace matforge
