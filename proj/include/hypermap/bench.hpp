#pragma once

// Stage-timing harness shared by `hypermap bench` and the acceptance suite.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "hypermap/classifier.hpp"
#include "hypermap/scene.hpp"
#include "hypermap/segmentation.hpp"

namespace hypermap {

struct BenchConfig {
    int width = 1886;
    int height = 1886;
    int bands = 164;
    SampleType dtype = SampleType::U8;
    ClassifyParams params{SimilarityAlgorithm::SAM, 20.0};
    double min_area_m2 = 0.01;
    double thickness_px = 2.0;
    int repeat = 3;
    std::uint64_t seed = 0;
};

struct BenchRow {
    std::size_t classes = 0;
    StageTimings timings;
    std::size_t unknown_count = 0;
    std::size_t region_count = 0;
};

/// Classes used for the two database sizes of the benchmark table.
inline std::vector<std::string> bench_class_names(std::size_t k) {
    static const std::vector<std::string> all{"Vegetation", "Water", "Ground", "Concrete", "Wood"};
    if (k == 0 || k > all.size()) throw InvalidArgument("bench supports 1 to 5 classes");
    return {all.begin(), all.begin() + std::ptrdiff_t(k)};
}

inline SpectralDatabase subset_database(const SpectralDatabase& db, const std::vector<std::string>& names) {
    SpectralDatabase out;
    for (const auto& c : db.classes())
        if (std::find(names.begin(), names.end(), c.name) != names.end())
            out.add_class(c.name, c.color, c.reference, c.taxonomy);
    if (out.size() != names.size()) throw InvalidArgument("bench database lacks a requested class");
    return out;
}

inline Scene bench_scene(const BenchConfig& cfg) {
    SceneSpec spec = builtin_scene("cornfields-like", cfg.width, cfg.height, cfg.bands);
    spec.dtype = cfg.dtype;
    spec.seed = cfg.seed;
    return synthesize(spec);
}

/// Classification plus segmentation; the fastest of `repeat` runs by total time.
inline BenchRow bench_pipeline(const HyperCube& cube, const SpectralDatabase& db, const BenchConfig& cfg) {
    BenchRow best;
    best.classes = db.size();
    for (int i = 0; i < std::max(1, cfg.repeat); ++i) {
        const Classification c = classify(cube, db, cfg.params);
        Segmentation s = segment(c.labels, cube.camera(), cfg.min_area_m2, cfg.thickness_px);
        s.timings.classification = c.seconds;
        if (i == 0 || s.timings.total() < best.timings.total()) {
            best.timings = s.timings;
            best.unknown_count = c.unknown_count;
            best.region_count = s.regions.regions.size();
        }
    }
    return best;
}

inline const std::vector<std::string>& bench_columns() {
    static const std::vector<std::string> cols{"classification", "edge detection", "contour extraction",
                                               "size filtering", "polygon approximation", "total"};
    return cols;
}

/// Fixed-width table, one row per database size, seconds with 4 decimals.
inline std::string format_bench_table(const std::vector<BenchRow>& rows) {
    std::string out = "classes";
    for (const auto& c : bench_columns()) out += "  " + c;
    out += '\n';
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%7zu", r.classes);
        out += buf;
        const double v[] = {r.timings.classification, r.timings.edge_detection, r.timings.contour_extraction,
                            r.timings.size_filtering, r.timings.polygon_approximation, r.timings.total()};
        for (std::size_t k = 0; k < bench_columns().size(); ++k) {
            std::snprintf(buf, sizeof buf, "  %*.4f", int(bench_columns()[k].size()), v[k]);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace hypermap
