#pragma once

#include <string>
#include <vector>

#include "matforge/library.hpp"
#include "matforge/mllm.hpp"
#include "matforge/seg.hpp"

namespace matforge {

enum class MatchSource { Mllm, Offline, ImagePrior };

const char* match_source_name(MatchSource source);

struct DescentStep {
    std::string prompt_kind; // major_type | subcategory | material
    std::string chosen;
    std::string raw_response;
};

struct MatchResult {
    int view_id = 0;
    int label = 0;
    std::string material_id;
    std::vector<DescentStep> trace;
    MatchSource source = MatchSource::Offline;
};

// Three-level descent per region: major type out of the 13, subcategory out
// of that type's children, then one material given the leaf captions
// verbatim. One re-ask per level; a second failure sends the region to the
// offline matcher. annotated_png holds the exact Set-of-Mark image bytes.
std::vector<MatchResult> match_regions_mllm(MllmClient& client,
                                            const std::vector<uint8_t>& annotated_png,
                                            const std::vector<RegionMask>& masks,
                                            const LibraryIndex& index,
                                            const std::string& object_hint = {});

std::vector<MatchResult> match_regions_mllm(MllmClient& client, const AnnotatedImage& annotated,
                                            const std::vector<RegionMask>& masks,
                                            const LibraryIndex& index,
                                            const std::string& object_hint = {});

// Deterministic oracle: nearest library mean color after zero-mean
// normalization of both sides (hue over brightness). Ties to the smallest id.
MatchResult match_region_offline(const RegionMask& mask, const LibraryIndex& index);

// Groups view-regions whose UV footprints overlap (IoU > 0.5) and makes each
// group adopt one material: majority vote, ties to the largest footprint.
struct UvFootprint {
    int view_id = 0;
    int label = 0;
    std::vector<uint8_t> texels; // texture-resolution occupancy of the region
    int64_t texel_count = 0;
};

std::vector<MatchResult> reconcile_cross_view(std::vector<MatchResult> results,
                                              const std::vector<UvFootprint>& footprints);

// Prompt builders exposed for tests.
std::string level_prompt(int level, int label, const std::vector<std::string>& options,
                         const std::vector<std::string>& captions);

} // namespace matforge
