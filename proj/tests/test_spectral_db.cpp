#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "hypermap/spectral_db.hpp"

using namespace hypermap;
namespace fs = std::filesystem;

namespace {

Spectrum spec(std::vector<double> v) {
    std::vector<double> wl;
    for (std::size_t i = 0; i < v.size(); ++i) wl.push_back(400.0 + 10.0 * double(i));
    return {wl, std::move(v)};
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = 0.0) {
    std::uniform_real_distribution<double> u(lo, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

fs::path tmp(const std::string& name) {
    fs::create_directories(HYPERMAP_TEST_TMP);
    return fs::path(HYPERMAP_TEST_TMP) / name;
}

} // namespace

TEST(Similarity, WorkedExamples) {
    EXPECT_NEAR(similarity(spec({1, 1, 0}), spec({1, 0, 0}), SimilarityAlgorithm::SAM), 45.0, 1e-12);
    EXPECT_NEAR(similarity(spec({0, 3}), spec({4, 0}), SimilarityAlgorithm::SAM), 90.0, 1e-12);
    EXPECT_NEAR(similarity(spec({2, 4, 6}), spec({1, 2, 3}), SimilarityAlgorithm::SAM), 0.0, 1e-12);
    EXPECT_EQ(similarity(spec({1, 1}), spec({1, 1}), SimilarityAlgorithm::Euclidean), 0.0);
    EXPECT_NEAR(similarity(spec({3, 0}), spec({0, 4}), SimilarityAlgorithm::Euclidean), 5.0, 1e-12);
}

TEST(Similarity, EuclideanGrowsWhileSamStaysZero) {
    const Spectrum base = spec({0.1, 0.2, 0.3, 0.4});
    double prev = -1;
    for (double c : {1.0, 1.5, 2.0, 4.0}) {
        Spectrum s = base;
        for (auto& v : s.values) v *= c;
        const double e = similarity(base, s, SimilarityAlgorithm::Euclidean);
        EXPECT_GE(e, prev);
        prev = e;
        EXPECT_NEAR(similarity(base, s, SimilarityAlgorithm::SAM), 0.0, 1e-9);
    }
    EXPECT_GT(prev, 0.0);
}

TEST(Similarity, MatchesArccosDefinition) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto a = random_vec(rng, 12, -1.0), b = random_vec(rng, 12, -1.0);
        double dot = 0, na = 0, nb = 0;
        for (int k = 0; k < 12; ++k) dot += a[k] * b[k], na += a[k] * a[k], nb += b[k] * b[k];
        const double ref = std::acos(std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
        EXPECT_NEAR(spectral_angle_deg(a, b), ref, 1e-9);
    }
}

TEST(Similarity, PropertySuite) {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_vec(rng, 32), b = random_vec(rng, 32);
        EXPECT_NEAR(spectral_angle_deg(a, a), 0.0, 1e-9);
        EXPECT_NEAR(spectral_angle_deg(a, b), spectral_angle_deg(b, a), 1e-9);
        EXPECT_NEAR(euclidean_distance(a, b), euclidean_distance(b, a), 1e-9);
        const double ab = spectral_angle_deg(a, b);
        EXPECT_GE(ab, 0.0);
        EXPECT_LE(ab, 90.0);
        for (double c : {1e-3, 1.0, 1e3}) {
            std::vector<double> ca = a;
            for (auto& v : ca) v *= c;
            EXPECT_NEAR(spectral_angle_deg(a, ca), 0.0, 1e-9);
            EXPECT_NEAR(spectral_angle_deg(ca, b), ab, 1e-6);
        }
    }
}

TEST(Similarity, Errors) {
    EXPECT_THROW(similarity(spec({1, 2}), spec({1, 2, 3}), SimilarityAlgorithm::SAM), InvalidArgument);
    EXPECT_THROW(similarity(spec({1, 2}), spec({1, 2, 3}), SimilarityAlgorithm::Euclidean), InvalidArgument);
    EXPECT_THROW(similarity(spec({0, 0}), spec({1, 2}), SimilarityAlgorithm::SAM), InvalidArgument);
    EXPECT_NO_THROW(similarity(spec({0, 0}), spec({1, 2}), SimilarityAlgorithm::Euclidean));
    EXPECT_EQ(parse_algorithm("sam"), SimilarityAlgorithm::SAM);
    EXPECT_EQ(parse_algorithm("euclidean"), SimilarityAlgorithm::Euclidean);
    EXPECT_THROW(parse_algorithm("cosine"), InvalidArgument);
}

TEST(Database, IdsAndDuplicates) {
    SpectralDatabase db;
    EXPECT_EQ(db.add_class("Water", {0, 0, 255}, spec({0.1, 0.2})), 1);
    EXPECT_THROW(db.add_class("Water", {0, 0, 255}, spec({0.1, 0.2})), InvalidArgument);
    for (const char* n : {"A", "B", "C", "D"}) db.add_class(n, {1, 2, 3}, spec({0.3, 0.1}));
    std::vector<ClassId> ids;
    for (const auto& c : db.classes()) ids.push_back(c.id);
    EXPECT_EQ(ids, (std::vector<ClassId>{1, 2, 3, 4, 5}));
}

TEST(Database, RejectsBadReferences) {
    SpectralDatabase db;
    EXPECT_THROW(db.add_class("Z", {}, spec({0, 0, 0})), InvalidArgument);
    EXPECT_THROW(db.add_class("E", {}, spec({})), InvalidArgument);
    db.add_class("A", {}, spec({1, 2, 3}));
    EXPECT_THROW(db.add_class("B", {}, spec({1, 2})), InvalidArgument);
    EXPECT_THROW(db.add_class("C", {}, spec({1, 2, 3}), {"Earth", "C"}), InvalidArgument);
    EXPECT_THROW(db.add_class("", {}, spec({1, 2, 3})), InvalidArgument);
}

TEST(Database, RemoveNeverRenumbers) {
    SpectralDatabase db;
    db.add_class("A", {}, spec({1, 0}));
    db.add_class("B", {}, spec({0, 1}));
    db.remove_class(1);
    ASSERT_EQ(db.size(), 1u);
    EXPECT_EQ(db.classes()[0].name, "B");
    EXPECT_EQ(db.classes()[0].id, 2);
    EXPECT_EQ(db.add_class("C", {}, spec({1, 1})), 3);
    EXPECT_THROW(SpectralDatabase{}.remove_class(99), NotFound);

    SpectralDatabase solo;
    solo.add_class("A", {}, spec({1, 0}));
    solo.remove_class(1);
    EXPECT_EQ(solo.add_class("C", {}, spec({1, 0})), 2);
}

TEST(Database, DefaultTaxonomy) {
    EXPECT_EQ(default_taxonomy_path("Water"), (std::vector<std::string>{"World", "Landscape", "Water"}));
    EXPECT_EQ(default_taxonomy_path("Vegetation"), (std::vector<std::string>{"World", "Vegetation"}));
    EXPECT_EQ(default_taxonomy_path("Tarp"), (std::vector<std::string>{"World", "Obstacle", "Tarp"}));
    EXPECT_EQ(default_taxonomy_path("Rock"), (std::vector<std::string>{"World", "Rock"}));
    SpectralDatabase db;
    db.add_class("Water", {}, spec({1}));
    db.add_class("Puddle", {}, spec({1}), {"World", "Landscape", "Water", "Puddle"});
    EXPECT_EQ(db.find("Water")->taxonomy.size(), 3u);
    EXPECT_EQ(db.find("Puddle")->taxonomy.back(), "Puddle");
}

TEST(Database, JsonRoundTrip) {
    std::mt19937_64 rng(9);
    SpectralDatabase db;
    for (const char* n : {"Concrete", "Ground", "Vegetation", "Water", "Wood"}) {
        Spectrum s = spec(random_vec(rng, 20));
        db.add_class(n, {std::uint8_t(rng() % 256), 7, 9}, s);
    }
    db.remove_class(2);
    const auto p = tmp("db.json");
    save_db(db, p);
    const SpectralDatabase once = load_db(p);
    ASSERT_EQ(once.size(), db.size());
    EXPECT_EQ(once.next_id(), db.next_id());
    for (std::size_t i = 0; i < db.size(); ++i) {
        const auto &a = db.classes()[i], &b = once.classes()[i];
        EXPECT_EQ(a.id, b.id);
        EXPECT_EQ(a.name, b.name);
        EXPECT_EQ(a.color, b.color);
        EXPECT_EQ(a.taxonomy, b.taxonomy);
        for (std::size_t k = 0; k < a.reference.size(); ++k) {
            EXPECT_EQ(b.reference.values[k], double(float(a.reference.values[k])));
            EXPECT_EQ(b.reference.wavelengths_nm[k], double(float(a.reference.wavelengths_nm[k])));
        }
    }
    save_db(once, p);
    EXPECT_EQ(load_db(p), once); // f32-exact values round-trip bit-identically
}

TEST(Database, LoadErrorsAndEmpty) {
    const auto p = tmp("bad.json");
    std::ofstream(p) << R"({"classes": []})";
    EXPECT_TRUE(load_db(p).empty());

    std::ofstream(p) << R"({"classes": [
        {"id": 1, "name": "A", "color": [1,2,3], "values": [0.1, 0.2]},
        {"id": 2, "name": "A", "color": [1,2,3], "values": [0.1, 0.2]}]})";
    EXPECT_THROW(load_db(p), InvalidArgument);

    std::ofstream(p) << R"({"classes": [{"id": 1, "name": "A", "color": [1,2,3], "values": [0, 0]}]})";
    EXPECT_THROW(load_db(p), InvalidArgument);

    std::ofstream(p) << R"({"classes": [{"id": 0, "name": "A", "color": [1,2,3], "values": [1]}]})";
    EXPECT_THROW(load_db(p), InvalidArgument);

    std::ofstream(p) << "{not json";
    EXPECT_THROW(load_db(p), InvalidArgument);

    std::ofstream(p) << R"({"classes": [{"id": 1}]})";
    EXPECT_THROW(load_db(p), InvalidArgument);

    EXPECT_THROW(load_db(tmp("absent.json")), IoError);
}
