#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "hypermap/classifier.hpp"
#include "hypermap/scene.hpp"

using namespace hypermap;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Orthonormal pair in 4 bands, all-positive combinations for small angles.
const std::vector<double> kR{0.5, 0.5, 0.5, 0.5};
const std::vector<double> kO{0.5, -0.5, 0.5, -0.5};

std::vector<double> rotated(double deg, double scale = 0.5) {
    std::vector<double> v(4);
    for (int i = 0; i < 4; ++i) v[i] = scale * (std::cos(deg * kDeg) * kR[i] + std::sin(deg * kDeg) * kO[i]);
    return v;
}

Spectrum spectrum(const std::vector<double>& v) {
    std::vector<double> wl;
    for (std::size_t i = 0; i < v.size(); ++i) wl.push_back(500.0 + 100.0 * double(i));
    return {wl, v};
}

HyperCube cube_of(const std::vector<std::vector<double>>& pixels, SampleType t = SampleType::F32) {
    std::vector<double> wl;
    for (std::size_t i = 0; i < pixels[0].size(); ++i) wl.push_back(500.0 + 100.0 * double(i));
    HyperCube c = HyperCube::zeros(int(pixels.size()), 1, wl, t);
    for (std::size_t p = 0; p < pixels.size(); ++p)
        for (std::size_t b = 0; b < wl.size(); ++b) c.set_value(p * wl.size() + b, pixels[p][b]);
    return c;
}

// Direct restatement of the labeling rule on top of similarity().
LabelMap brute_classify(const HyperCube& cube, const SpectralDatabase& db, const ClassifyParams& params) {
    LabelMap out(cube.width(), cube.height());
    for (int y = 0; y < cube.height(); ++y)
        for (int x = 0; x < cube.width(); ++x) {
            const Spectrum px = pixel_spectrum(cube, x, y);
            if (params.algorithm == SimilarityAlgorithm::SAM && px.is_zero()) continue;
            double best = INFINITY;
            ClassId id = kUnknown;
            for (const auto& c : db.classes()) {
                const double s = similarity(px, c.reference, params.algorithm);
                if (s < best) best = s, id = c.id;
            }
            out(x, y) = best <= params.variance ? id : kUnknown;
        }
    return out;
}

HyperCube random_cube(int w, int h, int b, std::uint64_t seed, SampleType t = SampleType::F32) {
    std::vector<double> wl;
    for (int i = 0; i < b; ++i) wl.push_back(400.0 + 10.0 * i);
    HyperCube c = HyperCube::zeros(w, h, wl, t);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < c.sample_count(); ++i) c.set_value(i, u(rng));
    return c;
}

SpectralDatabase random_db(int k, int b, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SpectralDatabase db;
    for (int i = 0; i < k; ++i) {
        std::vector<double> v(static_cast<std::size_t>(b));
        for (auto& x : v) x = u(rng);
        std::vector<double> wl;
        for (int j = 0; j < b; ++j) wl.push_back(400.0 + 10.0 * j);
        db.add_class("C" + std::to_string(i), {std::uint8_t(40 * i), 0, 0}, {wl, v});
    }
    return db;
}

} // namespace

TEST(Classifier, SevenDegreeRotation) {
    SpectralDatabase db;
    db.add_class("A", {255, 0, 0}, spectrum(kR));
    const HyperCube c = cube_of({rotated(7.0)});
    EXPECT_NEAR(spectral_angle_deg(pixel_spectrum(c, 0, 0).values, kR), 7.0, 1e-5);
    EXPECT_EQ(classify(c, db, {SimilarityAlgorithm::SAM, 5}).labels(0, 0), kUnknown);
    EXPECT_EQ(classify(c, db, {SimilarityAlgorithm::SAM, 10}).labels(0, 0), 1);
}

TEST(Classifier, ArgminBetweenTwoReferences) {
    SpectralDatabase db;
    db.add_class("A", {}, spectrum(rotated(0.0, 1.0)));
    db.add_class("B", {}, spectrum(rotated(40.0, 1.0)));
    const HyperCube c = cube_of({rotated(10.0), rotated(-10.0), rotated(35.0)});
    const auto r = classify(c, db, {SimilarityAlgorithm::SAM, 20});
    EXPECT_EQ(r.labels(0, 0), 1);
    EXPECT_EQ(r.labels(1, 0), 1);
    EXPECT_EQ(r.labels(2, 0), 2);
}

TEST(Classifier, VarianceZeroIsInclusive) {
    SceneSpec spec = builtin_scene("cornfields-like", 32, 32, 16);
    spec.illum_min = spec.illum_max = 1.0;
    const Scene s = synthesize(spec);
    const auto r = classify(s.cube, s.db, {SimilarityAlgorithm::SAM, 0.0});
    EXPECT_EQ(r.labels, s.truth); // unit-lit noiseless pixels equal their references
}

TEST(Classifier, TiesGoToSmallestId) {
    SpectralDatabase db;
    db.add_class("A", {}, spectrum({0.2, 0.4, 0.2, 0.4}));
    db.add_class("B", {}, spectrum({0.1, 0.2, 0.1, 0.2})); // same direction
    db.add_class("C", {}, spectrum({0.4, 0.2, 0.4, 0.2}));
    const HyperCube c = cube_of({{0.3, 0.6, 0.3, 0.6}, {0.3, 0.3, 0.3, 0.3}});
    const auto sam = classify(c, db, {SimilarityAlgorithm::SAM, 45});
    EXPECT_EQ(sam.labels(0, 0), 1);
    EXPECT_EQ(sam.labels(1, 0), 1); // equidistant from A and C
    const auto eu = classify(c, db, {SimilarityAlgorithm::Euclidean, 10});
    EXPECT_EQ(eu.labels(1, 0), 1);
}

TEST(Classifier, MatchesBruteForceRule) {
    for (SampleType t : {SampleType::U8, SampleType::U16, SampleType::F32}) {
        const HyperCube cube = random_cube(23, 17, 9, 100 + int(t), t);
        const SpectralDatabase db = random_db(6, 9, 7);
        for (auto algo : {SimilarityAlgorithm::SAM, SimilarityAlgorithm::Euclidean})
            for (double v : {5.0, 15.0, 30.0, 0.8}) {
                const ClassifyParams p{algo, v};
                EXPECT_EQ(classify(cube, db, p).labels, brute_classify(cube, db, p))
                    << to_string(t) << " " << to_string(algo) << " " << v;
            }
    }
}

TEST(Classifier, ZeroPixelIsUnknownUnderSam) {
    SpectralDatabase db;
    db.add_class("A", {}, spectrum(kR));
    const HyperCube c = cube_of({{0, 0, 0, 0}});
    const auto r = classify(c, db, {SimilarityAlgorithm::SAM, 90});
    EXPECT_EQ(r.labels(0, 0), kUnknown);
    EXPECT_EQ(r.unknown_count, 1u);
    EXPECT_EQ(r.counts.at(1), 0u);
}

TEST(Classifier, CountsPartitionPixels) {
    const HyperCube cube = random_cube(31, 29, 6, 3);
    const SpectralDatabase db = random_db(4, 6, 3);
    const auto r = classify(cube, db, {SimilarityAlgorithm::SAM, 20});
    std::size_t total = r.unknown_count;
    for (const auto& [id, n] : r.counts) total += n;
    EXPECT_EQ(total, cube.pixel_count());
    EXPECT_EQ(r.counts.size(), 4u);
    EXPECT_GE(r.seconds, 0.0);
}

TEST(Classifier, VarianceMonotonicity) {
    SceneSpec spec = builtin_scene("cornfields-like", 64, 64, 16);
    spec.noise_sigma = 0.03;
    const Scene s = synthesize(spec);
    LabelMap prev;
    for (double v : {1.0, 2.0, 5.0, 10.0, 20.0}) {
        const auto r = classify(s.cube, s.db, {SimilarityAlgorithm::SAM, v});
        if (!prev.data.empty())
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (prev.data[i] != kUnknown) EXPECT_EQ(r.labels.data[i], prev.data[i]);
        prev = r.labels;
    }
}

TEST(Classifier, PixelScaleInvarianceUnderSam) {
    const HyperCube cube = random_cube(16, 16, 8, 4);
    const SpectralDatabase db = random_db(5, 8, 4);
    HyperCube scaled = cube;
    for (std::size_t p = 0; p < cube.pixel_count(); ++p) {
        const double c = 0.25 + 0.5 * double(p % 3); // keeps values in [0,1]
        for (std::size_t b = 0; b < 8; ++b) scaled.set_value(p * 8 + b, cube.value(p * 8 + b) * c);
    }
    const ClassifyParams p{SimilarityAlgorithm::SAM, 1e3};
    EXPECT_EQ(classify(scaled, db, p).labels, classify(cube, db, p).labels);
}

TEST(Classifier, AddingAClassNeverLosesLabels) {
    SceneSpec spec = builtin_scene("runtime-add", 64, 64, 16);
    spec.noise_sigma = 0.01;
    const Scene s = synthesize(spec);
    SpectralDatabase db;
    for (const auto& c : s.db.classes())
        if (c.name != "Tarp") db.add_class(c.name, c.color, c.reference, c.taxonomy);
    const ClassifyParams p{SimilarityAlgorithm::SAM, 10};
    const auto before = classify(s.cube, db, p);
    db.add_class("Tarp", {255, 140, 0}, s.db.find("Tarp")->reference);
    const auto after = classify(s.cube, db, p);
    EXPECT_LT(after.unknown_count, before.unknown_count);
    for (std::size_t i = 0; i < before.labels.size(); ++i)
        if (before.labels.data[i] != kUnknown) EXPECT_NE(after.labels.data[i], kUnknown);
}

TEST(Classifier, DeterministicAcrossWorkerCounts) {
    const HyperCube cube = random_cube(40, 37, 12, 8, SampleType::U8);
    const SpectralDatabase db = random_db(5, 12, 8);
    const ClassifyParams p{SimilarityAlgorithm::SAM, 25};
    set_thread_count(1);
    const auto a = classify(cube, db, p);
    set_thread_count(3);
    const auto b = classify(cube, db, p);
    set_thread_count(0);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Classifier, Errors) {
    const HyperCube cube = random_cube(4, 4, 3, 1);
    EXPECT_THROW(
        {
            try {
                classify(cube, SpectralDatabase{}, {});
            } catch (const InvalidArgument& e) {
                EXPECT_STREQ(e.what(), "empty spectral database");
                throw;
            }
        },
        InvalidArgument);
    EXPECT_THROW(classify(cube, random_db(2, 4, 1), {}), InvalidArgument);
    EXPECT_THROW(classify(cube, random_db(2, 3, 1), {SimilarityAlgorithm::SAM, -1}), InvalidArgument);
}

TEST(Classifier, RenderAndSidecar) {
    SpectralDatabase db;
    db.add_class("Water", {30, 80, 200}, spectrum(kR));
    LabelMap m(2, 1);
    m(1, 0) = 1;
    const RgbImage img = render_labels(m, db);
    EXPECT_EQ(img(0, 0), (Rgb{0, 0, 0}));
    EXPECT_EQ(img(1, 0), (Rgb{30, 80, 200}));
    const auto j = label_sidecar(db);
    EXPECT_EQ(j["classes"]["0"]["name"], "Unknown");
    EXPECT_EQ(j["classes"]["1"]["name"], "Water");
    EXPECT_EQ(j["classes"]["1"]["color"], nlohmann::json::array({30, 80, 200}));
}
