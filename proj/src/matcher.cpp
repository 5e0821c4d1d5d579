#include "matforge/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace matforge {

const char* match_source_name(MatchSource source) {
    switch (source) {
        case MatchSource::Mllm: return "mllm";
        case MatchSource::Offline: return "offline";
        case MatchSource::ImagePrior: return "image-prior";
    }
    return "offline";
}

std::string level_prompt(int level, int label, const std::vector<std::string>& options,
                         const std::vector<std::string>& captions) {
    std::ostringstream out;
    out << "Look at the region marked '" << label << "' in the annotated image.\n";
    switch (level) {
        case 1:
            out << "Which major material type is it? Choose exactly one of:\n";
            break;
        case 2:
            out << "Within that type, which subcategory fits best? Choose exactly one of:\n";
            break;
        default:
            out << "Pick the single best-matching material from these candidates:\n";
            break;
    }
    for (size_t i = 0; i < options.size(); ++i) {
        out << "- " << options[i];
        if (level == 3 && i < captions.size() && !captions[i].empty())
            out << ": " << captions[i];
        out << "\n";
    }
    out << "Reply with JSON: {\"choice\": \"<option>\"}.";
    return out.str();
}

namespace {

// one prompt level with a single re-ask; empty return means both tries failed
std::string ask_level(MllmClient& client, const std::vector<uint8_t>& image_png,
                      const std::string& system, int level, int label,
                      const std::vector<std::string>& options,
                      const std::vector<std::string>& captions, std::string* raw_out) {
    PromptPayload payload;
    payload.system = system;
    std::vector<PromptPart> turn;
    PromptPart img;
    img.image = ImagePart{image_png, "image/png"};
    turn.push_back(std::move(img));
    turn.push_back({level_prompt(level, label, options, captions), std::nullopt});
    payload.user_turns.push_back(std::move(turn));

    for (int attempt = 0; attempt < 2; ++attempt) {
        MLLMResponse resp = client.complete(payload);
        *raw_out = resp.raw_text;
        try {
            return extract_choice(resp, options);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoValidChoice) throw;
        }
    }
    return {};
}

} // namespace

std::vector<MatchResult> match_regions_mllm(MllmClient& client, const AnnotatedImage& annotated,
                                            const std::vector<RegionMask>& masks,
                                            const LibraryIndex& index,
                                            const std::string& object_hint) {
    return match_regions_mllm(client, encode_png8(annotated.image), masks, index, object_hint);
}

std::vector<MatchResult> match_regions_mllm(MllmClient& client,
                                            const std::vector<uint8_t>& image_png,
                                            const std::vector<RegionMask>& masks,
                                            const LibraryIndex& index,
                                            const std::string& object_hint) {
    std::string system =
        "You identify physical materials of objects rendered with flat base colors. "
        "Regions carry numeric marks.";
    if (!object_hint.empty()) system = object_hint + "\n" + system;

    std::vector<MatchResult> results;
    for (const RegionMask& mask : masks) {
        MatchResult result;
        result.view_id = mask.view_id;
        result.label = mask.label;
        std::string raw;

        // level 1: major type, always offered the full 13-name list
        std::string level1 = ask_level(client, image_png, system, 1, mask.label,
                                       major_type_names(), {}, &raw);
        bool level1_listed = !level1.empty() && index.tree.count(level1) != 0;
        if (level1_listed) result.trace.push_back({"major_type", level1, raw});

        // level 2: subcategory
        std::string level2;
        if (level1_listed) {
            std::vector<std::string> subs;
            for (const auto& [sub, ids] : index.tree.at(level1)) subs.push_back(sub);
            level2 = ask_level(client, image_png, system, 2, mask.label, subs, {}, &raw);
            if (!level2.empty()) result.trace.push_back({"subcategory", level2, raw});
        }

        // level 3: material, captions verbatim
        std::string level3;
        if (!level2.empty()) {
            std::vector<std::string> ids;
            std::vector<std::string> captions;
            for (const MaterialRecord* rec : lookup(index, level1, level2)) {
                ids.push_back(rec->id);
                captions.push_back(rec->caption);
            }
            level3 = ask_level(client, image_png, system, 3, mask.label, ids, captions, &raw);
            if (!level3.empty()) result.trace.push_back({"material", level3, raw});
        }

        if (!level3.empty()) {
            result.material_id = level3;
            result.source = object_hint.empty() ? MatchSource::Mllm : MatchSource::ImagePrior;
        } else {
            MatchResult fallback = match_region_offline(mask, index);
            result.material_id = fallback.material_id;
            result.source = MatchSource::Offline;
            result.trace.push_back({"offline_fallback", result.material_id, ""});
        }
        results.push_back(std::move(result));
    }
    return results;
}

namespace {

void zero_mean(const float in[3], float out[3]) {
    float mean = (in[0] + in[1] + in[2]) / 3.0f;
    for (int c = 0; c < 3; ++c) out[c] = in[c] - mean;
}

} // namespace

MatchResult match_region_offline(const RegionMask& mask, const LibraryIndex& index) {
    if (index.records.empty()) throw Error(ErrorCode::EmptyLibrary, "offline matcher needs records");
    float query[3];
    zero_mean(mask.mean_diffuse_rgb, query);

    const MaterialRecord* best = nullptr;
    float best_d = 0.0f;
    for (const auto& [id, rec] : index.records) {
        float key[3];
        zero_mean(rec.mean_diffuse_rgb, key);
        float d = 0.0f;
        for (int c = 0; c < 3; ++c) d += (query[c] - key[c]) * (query[c] - key[c]);
        // map iteration is id-ascending, so strict less keeps the smallest id on ties
        if (!best || d < best_d) {
            best = &rec;
            best_d = d;
        }
    }
    MatchResult result;
    result.view_id = mask.view_id;
    result.label = mask.label;
    result.material_id = best->id;
    result.source = MatchSource::Offline;
    result.trace.push_back({"offline", best->id, ""});
    return result;
}

std::vector<MatchResult> reconcile_cross_view(std::vector<MatchResult> results,
                                              const std::vector<UvFootprint>& footprints) {
    auto find_footprint = [&](int view, int label) -> const UvFootprint* {
        for (const UvFootprint& fp : footprints)
            if (fp.view_id == view && fp.label == label) return &fp;
        return nullptr;
    };

    // union-find over regions with UV IoU > 0.5
    std::vector<int> parent(results.size());
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    for (size_t i = 0; i < results.size(); ++i) {
        const UvFootprint* a = find_footprint(results[i].view_id, results[i].label);
        if (!a || a->texel_count == 0) continue;
        for (size_t j = i + 1; j < results.size(); ++j) {
            const UvFootprint* b = find_footprint(results[j].view_id, results[j].label);
            if (!b || b->texel_count == 0 || a->texels.size() != b->texels.size()) continue;
            int64_t inter = 0, uni = 0;
            for (size_t t = 0; t < a->texels.size(); ++t) {
                bool in_a = a->texels[t] != 0, in_b = b->texels[t] != 0;
                inter += in_a && in_b;
                uni += in_a || in_b;
            }
            if (uni > 0 && double(inter) / double(uni) > 0.5) parent[find(int(i))] = find(int(j));
        }
    }

    std::map<int, std::vector<size_t>> groups;
    for (size_t i = 0; i < results.size(); ++i) groups[find(int(i))].push_back(i);

    for (const auto& [root, members] : groups) {
        if (members.size() < 2) continue;
        std::map<std::string, int> votes;
        for (size_t m : members) ++votes[results[m].material_id];
        int max_votes = 0;
        for (const auto& [id, n] : votes) max_votes = std::max(max_votes, n);
        std::vector<std::string> winners;
        for (const auto& [id, n] : votes)
            if (n == max_votes) winners.push_back(id);
        std::string winner;
        if (winners.size() == 1) {
            winner = winners[0];
        } else {
            // tie: material of the member with the largest UV footprint
            int64_t best_area = -1;
            for (size_t m : members) {
                const UvFootprint* fp = find_footprint(results[m].view_id, results[m].label);
                int64_t area = fp ? fp->texel_count : 0;
                bool tied_material = std::find(winners.begin(), winners.end(),
                                               results[m].material_id) != winners.end();
                if (tied_material && area > best_area) {
                    best_area = area;
                    winner = results[m].material_id;
                }
            }
        }
        for (size_t m : members) {
            if (results[m].material_id != winner) {
                results[m].trace.push_back({"reconciled", winner, ""});
                results[m].material_id = winner;
            }
        }
    }
    std::sort(results.begin(), results.end(), [](const MatchResult& a, const MatchResult& b) {
        return a.view_id != b.view_id ? a.view_id < b.view_id : a.label < b.label;
    });
    return results;
}

} // namespace matforge
