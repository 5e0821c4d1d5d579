#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "matforge/fixtures.hpp"
#include "matforge/library.hpp"

using namespace matforge;

namespace {

std::filesystem::path toy_root() {
    static std::filesystem::path root = [] {
        auto dir = std::filesystem::temp_directory_path() / "matforge_test_toylib";
        std::filesystem::remove_all(dir);
        fixtures::write_toy_library(dir);
        return dir;
    }();
    return root;
}

} // namespace

TEST_CASE("toy library ingests with twelve materials across three types") {
    LibraryIndex index = load_library(toy_root());
    CHECK(index.size() == 12);
    CHECK(index.tree.size() == 3);
    size_t leaf_total = 0;
    for (const auto& [type, subtree] : index.tree) {
        CHECK(subtree.size() == 2);
        for (const auto& [sub, ids] : subtree) leaf_total += ids.size();
    }
    CHECK(leaf_total == 12);
}

TEST_CASE("complete material directory yields all roles with key=diffuse") {
    MaterialRecord rec = ingest_material(toy_root() / "metal_gold_01");
    CHECK(rec.id == "metal_gold_01");
    CHECK(rec.major_type == "metal");
    CHECK(rec.subcategory == "gold");
    CHECK_FALSE(rec.caption.empty());
    CHECK_FALSE(rec.key_is_basecolor);
    for (ChannelRole role : {ChannelRole::Diffuse, ChannelRole::Normal, ChannelRole::Roughness,
                             ChannelRole::Metalness, ChannelRole::Height, ChannelRole::Specular})
        CHECK(rec.has_map(role));
    // close to the procedural base color
    CHECK(rec.mean_diffuse_rgb[0] == doctest::Approx(0.85f).epsilon(0.02));
}

TEST_CASE("black diffuse substitutes basecolor as key") {
    MaterialRecord rec = ingest_material(toy_root() / "metal_steel_02");
    CHECK(rec.key_is_basecolor);
    // key luminance must clear the black threshold
    const TextureMap& key = rec.key_diffuse();
    double lum = 0;
    for (size_t i = 0; i < key.pixel_count(); ++i)
        lum += 0.2126 * key.data[i * 3] + 0.7152 * key.data[i * 3 + 1] + 0.0722 * key.data[i * 3 + 2];
    CHECK(lum / double(key.pixel_count()) >= 0.02);
    CHECK(rec.mean_diffuse_rgb[2] == doctest::Approx(0.46f).epsilon(0.05));
}

TEST_CASE("ingest is idempotent") {
    MaterialRecord a = ingest_material(toy_root() / "wood_oak_01");
    MaterialRecord b = ingest_material(toy_root() / "wood_oak_01");
    CHECK(a.id == b.id);
    CHECK(a.caption == b.caption);
    for (int c = 0; c < 3; ++c) CHECK(a.mean_diffuse_rgb[c] == b.mean_diffuse_rgb[c]);
    CHECK(a.maps.at(ChannelRole::Diffuse).data == b.maps.at(ChannelRole::Diffuse).data);
}

TEST_CASE("missing manifest raises MissingManifest") {
    auto dir = std::filesystem::temp_directory_path() / "matforge_no_manifest";
    std::filesystem::create_directories(dir);
    CHECK_THROWS_WITH_AS(ingest_material(dir), doctest::Contains("MissingManifest"), Error);
}

TEST_CASE("neither diffuse nor basecolor raises NoDiffuseSource") {
    auto dir = std::filesystem::temp_directory_path() / "matforge_no_diffuse";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "material.json")
        << R"({"id":"x","major_type":"metal","subcategory":"gold","caption":""})";
    write_png8(dir / "roughness.png", TextureMap(4, 4, 1, ChannelRole::Roughness, 0.5f));
    CHECK_THROWS_WITH_AS(ingest_material(dir), doctest::Contains("NoDiffuseSource"), Error);
}

TEST_CASE("mixed resolutions raise ResolutionMismatch") {
    auto dir = std::filesystem::temp_directory_path() / "matforge_mixed_res";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "material.json")
        << R"({"id":"x","major_type":"metal","subcategory":"gold","caption":""})";
    write_png8(dir / "diffuse.png", TextureMap(4, 4, 3, ChannelRole::Diffuse, 0.5f));
    write_png8(dir / "roughness.png", TextureMap(8, 8, 1, ChannelRole::Roughness, 0.5f));
    CHECK_THROWS_WITH_AS(ingest_material(dir), doctest::Contains("ResolutionMismatch"), Error);
}

TEST_CASE("unknown major type rejected at ingest") {
    auto dir = std::filesystem::temp_directory_path() / "matforge_bad_type";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "material.json")
        << R"({"id":"x","major_type":"unobtainium","subcategory":"a","caption":""})";
    write_png8(dir / "diffuse.png", TextureMap(4, 4, 3, ChannelRole::Diffuse, 0.5f));
    CHECK_THROWS_WITH_AS(ingest_material(dir), doctest::Contains("UnknownMajorType"), Error);
}

TEST_CASE("duplicate ids rejected by build_index") {
    MaterialRecord a = ingest_material(toy_root() / "wood_oak_01");
    MaterialRecord b = a;
    std::vector<MaterialRecord> records;
    records.push_back(std::move(a));
    records.push_back(std::move(b));
    CHECK_THROWS_WITH_AS(build_index(std::move(records)), doctest::Contains("DuplicateId"), Error);
}

TEST_CASE("lookup by type and subcategory") {
    LibraryIndex index = load_library(toy_root());
    auto gold = lookup(index, "metal", "gold");
    REQUIRE(gold.size() == 2);
    CHECK(gold[0]->id == "metal_gold_01");
    CHECK(gold[1]->id == "metal_gold_02");

    auto wood = lookup(index, "wood");
    CHECK(wood.size() == 4);

    CHECK_THROWS_WITH_AS(lookup(index, "metal", "unobtainium"),
                         doctest::Contains("UnknownSubcategory"), Error);
    CHECK_THROWS_WITH_AS(lookup(index, "granite"), doctest::Contains("UnknownMajorType"), Error);
}

TEST_CASE("every record reachable by exactly one tree path") {
    LibraryIndex index = load_library(toy_root());
    std::map<std::string, int> seen;
    for (const auto& [type, subtree] : index.tree)
        for (const auto& [sub, ids] : subtree)
            for (const auto& id : ids) ++seen[id];
    CHECK(seen.size() == index.size());
    for (const auto& [id, count] : seen) CHECK(count == 1);
}

TEST_CASE("caption prompt names the six attributes and the image count") {
    std::string prompt = caption_prompt_text("gold", 3);
    for (const char* word :
         {"color", "pattern", "roughness", "metalness", "embossing", "condition"})
        CHECK(prompt.find(word) != std::string::npos);
    CHECK(prompt.find("3") != std::string::npos);
    CHECK(prompt.find("shape of the object") != std::string::npos); // forbidden topic named
}

TEST_CASE("caption_material attaches captions in order") {
    auto mock = std::make_unique<MockTransport>();
    mock->push_json_text({{"captions", {"cap one", "cap two", "cap three"}}});
    MockTransport* raw = mock.get();
    MllmClient client(std::move(mock));
    std::vector<std::vector<uint8_t>> images(3, std::vector<uint8_t>{1, 2, 3});
    auto captions = caption_material(client, images, "gold");
    REQUIRE(captions.size() == 3);
    CHECK(captions[0] == "cap one");
    CHECK(captions[2] == "cap three");
    CHECK(raw->calls() == 1);
}

TEST_CASE("caption count mismatch retries once then fails") {
    auto mock = std::make_unique<MockTransport>();
    mock->push_json_text({{"captions", {"only", "two"}}});
    mock->push_json_text({{"captions", {"still", "two"}}});
    MockTransport* raw = mock.get();
    MllmClient client(std::move(mock));
    std::vector<std::vector<uint8_t>> images(3, std::vector<uint8_t>{9});
    CHECK_THROWS_WITH_AS(caption_material(client, images, "gold"),
                         doctest::Contains("MalformedResponse"), Error);
    CHECK(raw->calls() == 2);
}

TEST_CASE("store_caption rewrites material.json") {
    auto dir = std::filesystem::temp_directory_path() / "matforge_store_caption";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "material.json")
        << R"({"id":"x","major_type":"metal","subcategory":"gold","caption":"old"})";
    store_caption(dir, "new caption");
    std::ifstream in(dir / "material.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("new caption") != std::string::npos);
    CHECK(text.find("\"old\"") == std::string::npos);
}
