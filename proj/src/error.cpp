#include "matforge/error.hpp"

namespace matforge {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingUVs: return "MissingUVs";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::EmptyMesh: return "EmptyMesh";
        case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorCode::ChannelMismatch: return "ChannelMismatch";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::DegenerateMesh: return "DegenerateMesh";
        case ErrorCode::MissingChannel: return "MissingChannel";
        case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
        case ErrorCode::NoMasksFound: return "NoMasksFound";
        case ErrorCode::MissingManifest: return "MissingManifest";
        case ErrorCode::NoDiffuseSource: return "NoDiffuseSource";
        case ErrorCode::UnknownMajorType: return "UnknownMajorType";
        case ErrorCode::UnknownSubcategory: return "UnknownSubcategory";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::NoValidChoice: return "NoValidChoice";
        case ErrorCode::MatchFailure: return "MatchFailure";
        case ErrorCode::EmptyLibrary: return "EmptyLibrary";
        case ErrorCode::NoAssignedRegions: return "NoAssignedRegions";
        case ErrorCode::MaterialMissing: return "MaterialMissing";
        case ErrorCode::UnassignedTexels: return "UnassignedTexels";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::MissingPriorArtifact: return "MissingPriorArtifact";
    }
    return "Unknown";
}

} // namespace matforge
