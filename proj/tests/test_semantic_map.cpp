#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "hypermap/scene.hpp"
#include "hypermap/semantic_map.hpp"

using namespace hypermap;
namespace fs = std::filesystem;

namespace {

SpectralDatabase two_class_db() {
    SpectralDatabase db;
    db.add_class("Water", {30, 80, 200}, {{}, {0.1, 0.2}});
    db.add_class("Vegetation", {40, 160, 40}, {{}, {0.2, 0.1}});
    return db;
}

// Map resolution equal to the frame's meters per pixel, pose on a cell corner.
CameraMeta unit_camera(double x = 0, double y = 0) { return {1.0, 90.0, {x, y, 0.0}}; } // side 2 m

LabelMap blobs(int w, int h, std::uint64_t seed, int classes = 2) {
    std::mt19937_64 rng(seed);
    LabelMap m(w, h, 1);
    for (int k = 0; k < 6; ++k) {
        const int cx = int(rng() % unsigned(w)), cy = int(rng() % unsigned(h)), r = 2 + int(rng() % 6);
        const ClassId label = ClassId(rng() % unsigned(classes + 1));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) m(x, y) = label;
    }
    return m;
}

RegionSet regions_of(const LabelMap& m) { return extract_regions(m); }

fs::path tmp(const std::string& name) {
    fs::create_directories(HYPERMAP_TEST_TMP);
    return fs::path(HYPERMAP_TEST_TMP) / name;
}

} // namespace

TEST(LabelTree, PathsAndOrder) {
    InstanceLabelTree t;
    t.add_path({"World", "Obstacle", "Wood"});
    t.add_path({"World", "Landscape", "Water"});
    t.add_path({"World", "Landscape", "Ground"});
    EXPECT_EQ(t.nodes(), (std::vector<std::string>{"World", "World/Landscape", "World/Landscape/Ground",
                                                   "World/Landscape/Water", "World/Obstacle", "World/Obstacle/Wood"}));
    EXPECT_TRUE(t.contains("World/Obstacle"));
    EXPECT_THROW(t.add_path({"Earth", "X"}), InvalidArgument);
}

TEST(SemanticMap, ResolutionMustBePositive) {
    EXPECT_THROW(SemanticMap(0.0), InvalidArgument);
    EXPECT_THROW(SemanticMap(-1.0), InvalidArgument);
}

TEST(SemanticMap, SingleFrameIsIdentityAtMatchingResolution) {
    const LabelMap m = blobs(40, 40, 1);
    SemanticMap map(2.0 / 40);
    map.ingest_frame(regions_of(m), unit_camera(), "f1");
    EXPECT_EQ(map.grid(), m);
    EXPECT_EQ(map.gx0(), -20);
    EXPECT_EQ(map.gy_top(), 20);
}

TEST(SemanticMap, SingleFrameWithUnknownKeepsUnknownCells) {
    LabelMap m = blobs(20, 20, 5);
    m(3, 3) = kUnknown;
    SemanticMap map(2.0 / 20);
    map.ingest_frame(regions_of(m), unit_camera(), "f1");
    EXPECT_EQ(map.grid(), m);
}

TEST(SemanticMap, IdempotentReingestion) {
    const LabelMap m = blobs(30, 30, 2);
    SemanticMap map(0.05);
    map.ingest_frame(regions_of(m), CameraMeta{1.3, 70, {0.3, -0.2, 0.4}}, "a");
    const LabelMap once = map.grid();
    map.ingest_frame(regions_of(m), CameraMeta{1.3, 70, {0.3, -0.2, 0.4}}, "a");
    EXPECT_EQ(map.grid(), once);
}

TEST(SemanticMap, LaterFrameWinsButUnknownNeverErases) {
    SemanticMap map(0.1);
    LabelMap a(20, 20, 1);
    map.ingest_frame(regions_of(a), unit_camera(0, 0), "a");
    LabelMap b(20, 20, 2);
    for (int y = 0; y < 20; ++y)
        for (int x = 10; x < 20; ++x) b(x, y) = kUnknown;
    map.ingest_frame(regions_of(b), unit_camera(1, 0), "b"); // shifted right by half a frame
    // World x in [0,1): frame b's left half labels 2 on top of a's right half.
    ASSERT_EQ(map.grid().width, 30);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 10; ++x) EXPECT_EQ(map.grid()(x, y), 1);
        for (int x = 10; x < 20; ++x) EXPECT_EQ(map.grid()(x, y), 2);
        for (int x = 20; x < 30; ++x) EXPECT_EQ(map.grid()(x, y), kUnknown);
    }
    LabelMap c(20, 20, kUnknown);
    const std::size_t before = map.known_cells();
    map.ingest_frame(regions_of(c), unit_camera(0, 0), "c");
    EXPECT_EQ(map.known_cells(), before);
}

TEST(SemanticMap, DisjointFramesCommute) {
    const LabelMap a = blobs(24, 24, 3), b = blobs(24, 24, 4);
    SemanticMap ab(0.05), ba(0.05);
    ab.ingest_frame(regions_of(a), CameraMeta{1, 60, {-3, 1, 0.2}}, "a");
    ab.ingest_frame(regions_of(b), CameraMeta{1, 60, {3, -1, -0.7}}, "b");
    ba.ingest_frame(regions_of(b), CameraMeta{1, 60, {3, -1, -0.7}}, "b");
    ba.ingest_frame(regions_of(a), CameraMeta{1, 60, {-3, 1, 0.2}}, "a");
    EXPECT_EQ(ab.grid(), ba.grid());
    EXPECT_EQ(ab.gx0(), ba.gx0());
    EXPECT_EQ(ab.gy_top(), ba.gy_top());
}

TEST(SemanticMap, KnownCellsNeverDecrease) {
    SemanticMap map(0.04);
    std::size_t prev = 0;
    for (int i = 0; i < 6; ++i) {
        LabelMap m = blobs(32, 32, 10 + std::uint64_t(i));
        map.ingest_frame(regions_of(m), CameraMeta{1, 60, {0.3 * i, 0.1 * i, 0.2 * i}}, "f" + std::to_string(i));
        EXPECT_GE(map.known_cells(), prev);
        prev = map.known_cells();
    }
}

TEST(SemanticMap, FeaturesRasterizeBackAndSumAreas) {
    SemanticMap map(0.05);
    map.register_classes(two_class_db());
    map.ingest_frame(regions_of(blobs(40, 40, 6)), CameraMeta{1, 60, {0.2, 0.1, 0.3}}, "a");
    map.ingest_frame(regions_of(blobs(40, 40, 7)), CameraMeta{1, 60, {0.9, 0.4, -0.2}}, "b");
    const auto features = map.extract_features();
    ASSERT_FALSE(features.empty());
    LabelMap back(map.grid().width, map.grid().height, kUnknown);
    double area = 0;
    for (const auto& f : features) {
        std::vector<Ring> rings;
        auto cells = [&](const Ring& r) {
            Ring out;
            for (const auto& p : r) out.push_back(map.world_to_cell(p));
            return out;
        };
        rings.push_back(cells(f.outer));
        for (const auto& h : f.holes) rings.push_back(cells(h));
        rasterize_rings(rings, back.width, back.height, [&](int x, int y) { back(x, y) = f.label; });
        area += f.area_m2;
        EXPECT_GT(f.area_m2, 0);
        EXPECT_GT(signed_area(f.outer), 0); // counter-clockwise in the y-up world frame
        EXPECT_FALSE(f.source_frames.empty());
    }
    EXPECT_EQ(back, map.grid());
    EXPECT_NEAR(area, double(map.known_cells()) * 0.05 * 0.05, 1e-9);
}

TEST(SemanticMap, UniformFootprintGivesOneFeature) {
    SemanticMap map(0.05);
    map.register_classes(two_class_db());
    map.ingest_frame(regions_of(LabelMap(50, 50, 1)), CameraMeta{2.0, 50.0, {0.37, 0.11, 0.5}}, "a");
    const auto f = map.extract_features();
    ASSERT_EQ(f.size(), 1u);
    const Footprint fp = image_footprint(2.0, 50.0);
    // Boundary quantization: at most one cell row along the perimeter.
    EXPECT_NEAR(f[0].area_m2, fp.area_m2, 4 * fp.side_m * 0.05);
    EXPECT_EQ(f[0].instance_label, "World/Landscape/Water");
    EXPECT_EQ(f[0].source_frames, std::vector<std::string>{"a"});
}

TEST(SemanticMap, EmptyMapHasNoFeatures) {
    SemanticMap map;
    EXPECT_TRUE(map.extract_features().empty());
    const Ontology g = build_ontology(map, {});
    ASSERT_EQ(g.nodes.size(), 1u);
    EXPECT_EQ(g.nodes[0].id, "World");
}

TEST(SemanticMap, DisjointBlobsShareInstanceLabel) {
    LabelMap m(20, 20, kUnknown);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) m(x, y) = 1, m(x + 10, y + 10) = 1;
    SemanticMap map(0.1);
    map.register_classes(two_class_db());
    map.ingest_frame(regions_of(m), unit_camera(), "a");
    const auto f = map.extract_features();
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(f[0].instance_label, f[1].instance_label);
    EXPECT_NE(f[0].id, f[1].id);
}

TEST(Ontology, WaterFeaturePath) {
    LabelMap m(10, 10, kUnknown);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) m(x, y) = 1;
    SemanticMap map(0.2);
    SpectralDatabase db;
    db.add_class("Water", {0, 0, 255}, {{}, {1.0}});
    map.register_classes(db);
    map.ingest_frame(regions_of(m), unit_camera(), "a");
    const auto features = map.extract_features();
    ASSERT_EQ(features.size(), 1u);
    const Ontology g = build_ontology(map, features);
    std::vector<std::string> ids;
    for (const auto& n : g.nodes) ids.push_back(n.id);
    const std::string inst = "feature:" + features[0].id;
    EXPECT_EQ(ids, (std::vector<std::string>{"World", "World/Landscape", "World/Landscape/Water", inst}));
    ASSERT_EQ(g.edges.size(), 3u);
    EXPECT_EQ(g.edges[2].from, "World/Landscape/Water");
    EXPECT_EQ(g.edges[2].to, inst);
    EXPECT_EQ(g.edges[2].kind, "instance");
    EXPECT_NEAR(*g.nodes[3].area_m2, 16 * 0.04, 1e-12);

    const auto j = ontology_json(g);
    EXPECT_EQ(j["nodes"].size(), 4u);
    EXPECT_EQ(j["nodes"][3]["kind"], "instance");
    const std::string dot = ontology_dot(g);
    EXPECT_NE(dot.find("\"World/Landscape\" -> \"World/Landscape/Water\""), std::string::npos);
    EXPECT_EQ(dot, ontology_dot(build_ontology(map, map.extract_features())));
}

TEST(Ontology, RuntimeTarpAddsLeafAndKeepsPriorNodes) {
    SceneSpec spec = builtin_scene("runtime-add", 64, 64, 8);
    const Scene s = synthesize(spec);
    SpectralDatabase without;
    for (const auto& c : s.db.classes())
        if (c.name != "Tarp") without.add_class(c.name, c.color, c.reference, c.taxonomy);

    auto run = [&](const SpectralDatabase& db) {
        const auto labels = classify(s.cube, db, {SimilarityAlgorithm::SAM, 10}).labels;
        SemanticMap map(0.05);
        map.register_classes(db);
        map.ingest_frame(regions_of(labels), spec.camera, "frame-1");
        return build_ontology(map, map.extract_features());
    };
    const Ontology before = run(without);
    const Ontology after = run(s.db);

    auto has = [](const Ontology& g, const std::string& id) {
        return std::any_of(g.nodes.begin(), g.nodes.end(), [&](const auto& n) { return n.id == id; });
    };
    EXPECT_FALSE(has(before, "World/Obstacle/Tarp"));
    EXPECT_TRUE(has(after, "World/Obstacle/Tarp"));
    const bool tarp_instance = std::any_of(after.edges.begin(), after.edges.end(), [](const auto& e) {
        return e.from == "World/Obstacle/Tarp" && e.kind == "instance";
    });
    EXPECT_TRUE(tarp_instance);
    for (const auto& n : before.nodes) EXPECT_TRUE(has(after, n.id)) << n.id;
}

TEST(SemanticMap, PersistenceRoundTrip) {
    SemanticMap map(0.05);
    map.register_classes(two_class_db());
    map.ingest_frame(regions_of(blobs(30, 30, 8)), CameraMeta{1, 60, {0.2, 0.1, 0.3}}, "a");
    map.ingest_frame(regions_of(blobs(30, 30, 9)), CameraMeta{1, 60, {0.5, 0.4, -0.2}}, "b");
    const auto dir = tmp("map-rt");
    fs::remove_all(dir);
    save_map(map, dir);
    EXPECT_TRUE(fs::exists(dir / "grid.png"));
    const SemanticMap back = load_map(dir);
    EXPECT_TRUE(back == map);
    EXPECT_EQ(ontology_dot(build_ontology(back, back.extract_features())),
              ontology_dot(build_ontology(map, map.extract_features())));

    SemanticMap empty;
    save_map(empty, tmp("map-empty"));
    EXPECT_TRUE(load_map(tmp("map-empty")).empty());
    EXPECT_THROW(load_map(tmp("map-missing")), IoError);
}

TEST(GeoJson, RegionCollection) {
    LabelMap m(4, 4, 1);
    m(1, 1) = 2;
    RegionSet set = extract_regions(m);
    compute_areas(set, CameraMeta{1, 90, {}});
    const auto j = regions_to_geojson(set, two_class_db());
    EXPECT_EQ(j["type"], "FeatureCollection");
    ASSERT_EQ(j["features"].size(), 2u);
    const auto& outer = j["features"][0];
    EXPECT_EQ(outer["properties"]["class_name"], "Water");
    EXPECT_EQ(outer["properties"]["pixel_count"], 15);
    EXPECT_NEAR(outer["properties"]["area_m2"].get<double>(), 15 * 0.25, 1e-12);
    const auto& coords = outer["geometry"]["coordinates"];
    ASSERT_EQ(coords.size(), 2u); // outer + hole
    EXPECT_EQ(coords[0].front(), coords[0].back());
    EXPECT_EQ(j["features"][1]["properties"]["parent"], 0);
}
