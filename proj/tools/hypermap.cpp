// hypermap: command-line driver for the pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "hypermap/bench.hpp"
#include "hypermap/classifier.hpp"
#include "hypermap/cube.hpp"
#include "hypermap/geojson.hpp"
#include "hypermap/png.hpp"
#include "hypermap/scene.hpp"
#include "hypermap/segmentation.hpp"
#include "hypermap/semantic_map.hpp"
#include "hypermap/service.hpp"
#include "hypermap/spectral_db.hpp"

namespace fs = std::filesystem;
using namespace hypermap;

namespace {

struct Options {
    unsigned threads = 0;
    std::uint64_t seed = 0;
    std::string spec, cube, db, labels, out, algorithm = "sam", dtype, host = "127.0.0.1";
    std::vector<std::string> frames;
    double variance = 20.0;
    double min_area_m2 = 0.0;
    double thickness_px = 1.0;
    double resolution_m = kDefaultMapResolution;
    int width = 0, height = 0, bands = 0;
    std::vector<std::size_t> classes{2, 5};
    int repeat = 3;
    int port = kDefaultPort;
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_out_dir(const std::string& out) {
    const fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create output directory: " + out);
    return dir;
}

void write_labels(const fs::path& dir, const std::string& stem, const LabelMap& labels, const SpectralDatabase& db) {
    png::write_file(dir / (stem + ".png"), png::encode_gray16(labels));
    png::write_file(dir / (stem + "_rgb.png"), png::encode_rgb(render_labels(labels, db)));
}

LabelMap read_labels(const fs::path& path) { return png::decode_gray16(png::read_file(path)); }

ClassifyParams classify_params(const Options& o) { return {parse_algorithm(o.algorithm), o.variance}; }

nlohmann::json counts_json(const Classification& c) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : c.counts) counts[std::to_string(id)] = n;
    return counts;
}

void print_timings(const StageTimings& t) {
    std::printf("classification: %.4f s\nedge detection: %.4f s\ncontour extraction: %.4f s\n"
                "size filtering: %.4f s\npolygon approximation: %.4f s\ntotal: %.4f s\n",
                t.classification, t.edge_detection, t.contour_extraction, t.size_filtering,
                t.polygon_approximation, t.total());
}

int run_gen_scene(const Options& o, bool seed_given) {
    SceneSpec spec;
    if (fs::is_regular_file(o.spec)) {
        if (o.width || o.height || o.bands) throw InvalidArgument("--width/--height/--bands apply to built-in scenes only");
        spec = load_scene_spec(o.spec);
    } else {
        spec = builtin_scene(o.spec, o.width ? o.width : 256, o.height ? o.height : 256, o.bands ? o.bands : 64);
    }
    if (seed_given) spec.seed = o.seed;
    if (!o.dtype.empty()) spec.dtype = parse_sample_type(o.dtype);
    const Scene scene = synthesize(spec);

    const fs::path dir = prepare_out_dir(o.out);
    save_cube(scene.cube, dir / "cube.hsc", scene.cube.sample_type());
    write_labels(dir, "truth", scene.truth, scene.db);
    auto sidecar = label_sidecar(scene.db);
    std::size_t covered = 0;
    for (auto v : scene.truth.data) covered += v != kUnknown;
    sidecar["covered_pixels"] = covered;
    write_json(dir / "truth.json", sidecar);
    save_db(scene.db, dir / "db.json");
    write_json(dir / "scene.json", to_json(spec));
    std::printf("scene %dx%dx%d (%s) written to %s\n", scene.cube.width(), scene.cube.height(), scene.cube.bands(),
                to_string(scene.cube.sample_type()), dir.string().c_str());
    return 0;
}

int run_classify(const Options& o) {
    const HyperCube cube = load_cube(o.cube);
    const SpectralDatabase db = load_db(o.db);
    const ClassifyParams params = classify_params(o);
    const Classification c = classify(cube, db, params);

    const fs::path dir = prepare_out_dir(o.out);
    write_labels(dir, "labels", c.labels, db);
    auto meta = label_sidecar(db);
    meta["algorithm"] = to_string(params.algorithm);
    meta["variance"] = params.variance;
    meta["counts"] = counts_json(c);
    meta["unknown_count"] = c.unknown_count;
    write_json(dir / "labels.json", meta);
    std::printf("classification: %.4f s\nunknown: %zu of %zu pixels\n", c.seconds, c.unknown_count, c.labels.size());
    return 0;
}

int run_segment(const Options& o) {
    const HyperCube cube = load_cube(o.cube);
    SpectralDatabase db;
    if (!o.db.empty()) db = load_db(o.db);
    LabelMap labels;
    double classify_s = 0.0;
    if (!o.labels.empty()) {
        labels = read_labels(o.labels);
        if (labels.width != cube.width() || labels.height != cube.height())
            throw InvalidArgument("label map size does not match the cube");
    } else {
        if (o.db.empty()) throw InvalidArgument("segment needs --db or --labels");
        const Classification c = classify(cube, db, classify_params(o));
        labels = c.labels;
        classify_s = c.seconds;
    }
    Segmentation s = segment(labels, cube.camera(), o.min_area_m2, o.thickness_px);
    s.timings.classification = classify_s;

    const fs::path dir = prepare_out_dir(o.out);
    const PixelToWorld to_world(cube.width(), cube.height(), cube.camera());
    write_json(dir / "regions.geojson", regions_to_geojson(s.regions, db));
    write_json(dir / "regions_world.geojson", regions_to_geojson(s.regions, db, [&](Point p) { return to_world(p); }));
    write_labels(dir, "labels_filtered", s.labels, db);
    write_json(dir / "timings.json", timings_json(s.timings)); // wall-clock, varies between runs
    std::printf("regions: %zu\n", s.regions.regions.size());
    print_timings(s.timings);
    return 0;
}

int run_map(const Options& o) {
    if (o.frames.empty()) throw InvalidArgument("map needs at least one frame cube");
    const SpectralDatabase db = load_db(o.db);
    SemanticMap map(o.resolution_m);
    map.register_classes(db);
    for (const auto& path : o.frames) {
        const HyperCube cube = load_cube(path);
        const Classification c = classify(cube, db, classify_params(o));
        const Segmentation s = segment(c.labels, cube.camera(), o.min_area_m2, o.thickness_px);
        map.ingest_frame(s.regions, cube.camera(), path);
        std::printf("ingested %s: %zu regions, %zu known cells\n", path.c_str(), s.regions.regions.size(),
                    map.known_cells());
    }
    const auto features = map.extract_features();
    const Ontology graph = build_ontology(map, features);

    const fs::path dir = prepare_out_dir(o.out);
    save_map(map, dir / "map");
    write_json(dir / "features.geojson", features_to_geojson(features, map));
    write_text(dir / "ontology.dot", ontology_dot(graph));
    write_json(dir / "ontology.json", ontology_json(graph));
    std::printf("features: %zu\n", features.size());
    return 0;
}

int run_bench(const Options& o) {
    BenchConfig cfg;
    cfg.params = classify_params(o);
    cfg.min_area_m2 = o.min_area_m2;
    cfg.thickness_px = o.thickness_px;
    cfg.repeat = o.repeat;
    cfg.seed = o.seed;
    if (o.width) cfg.width = o.width;
    if (o.height) cfg.height = o.height;
    if (o.bands) cfg.bands = o.bands;

    HyperCube cube;
    SpectralDatabase full;
    if (!o.cube.empty()) {
        if (o.db.empty()) throw InvalidArgument("bench --cube needs --db");
        cube = load_cube(o.cube);
        full = load_db(o.db);
    } else {
        Scene scene = bench_scene(cfg);
        cube = std::move(scene.cube);
        full = std::move(scene.db);
    }
    std::printf("cube %dx%dx%d (%s), %u threads, best of %d\n", cube.width(), cube.height(), cube.bands(),
                to_string(cube.sample_type()), thread_count(), cfg.repeat);

    std::vector<BenchRow> rows;
    for (std::size_t k : o.classes) {
        SpectralDatabase db;
        if (!o.cube.empty()) {
            if (k > full.size()) throw InvalidArgument("database has fewer than " + std::to_string(k) + " classes");
            for (std::size_t i = 0; i < k; ++i) {
                const auto& c = full.classes()[i];
                db.add_class(c.name, c.color, c.reference, c.taxonomy);
            }
        } else {
            db = subset_database(full, bench_class_names(k));
        }
        rows.push_back(bench_pipeline(cube, db, cfg));
    }
    std::fputs(format_bench_table(rows).c_str(), stdout);

    if (!o.out.empty()) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows)
            j.push_back({{"classes", r.classes}, {"times_s", timings_json(r.timings)}, {"unknown_count", r.unknown_count},
                         {"region_count", r.region_count}});
        write_json(o.out, j);
    }
    return 0;
}

int run_serve(const Options& o) {
    SpectralDatabase db;
    if (!o.db.empty()) db = load_db(o.db);
    Session session(load_cube(o.cube), std::move(db), o.resolution_m);
    Service service(session);
    std::printf("serving on http://%s:%d\n", o.host.c_str(), o.port);
    std::fflush(stdout);
    service.listen(o.host, o.port);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral semantic mapping pipeline"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--threads", o.threads, "Worker threads (default: HYPERMAP_THREADS, then all cores)")
        ->check(CLI::PositiveNumber);

    const auto algorithm_check = CLI::IsMember({"sam", "euclidean"});
    auto add_classify_flags = [&](CLI::App* sub) {
        sub->add_option("--variance", o.variance, "Similarity threshold in degrees for SAM (default 20)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--algorithm", o.algorithm, "Similarity metric")->capture_default_str()->check(algorithm_check);
    };
    auto add_segment_flags = [&](CLI::App* sub, const char* defaults) {
        sub->add_option("--min-area-m2", o.min_area_m2, std::string("Drop regions smaller than this area") + defaults)
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--thickness-px", o.thickness_px, "Polygon approximation edge thickness")
            ->check(CLI::NonNegativeNumber);
    };

    auto* gen = app.add_subcommand("gen-scene", "Synthesize a cube, ground truth and database");
    gen->add_option("--spec", o.spec, "Scene JSON file or built-in name (cornfields-like, runtime-add)")->required();
    gen->add_option("--out", o.out, "Output directory")->required();
    auto* gen_seed = gen->add_option("--seed", o.seed, "Override the scene seed");
    gen->add_option("--width", o.width, "Built-in scene width")->check(CLI::PositiveNumber);
    gen->add_option("--height", o.height, "Built-in scene height")->check(CLI::PositiveNumber);
    gen->add_option("--bands", o.bands, "Built-in scene band count")->check(CLI::PositiveNumber);
    gen->add_option("--dtype", o.dtype, "Sample type")->check(CLI::IsMember({"u8", "u16", "f32"}));

    auto* cls = app.add_subcommand("classify", "Label every pixel against the spectral database");
    cls->add_option("--cube", o.cube, "Input cube (.hsc)")->required();
    cls->add_option("--db", o.db, "Spectral database JSON")->required();
    cls->add_option("--out", o.out, "Output directory")->required();
    add_classify_flags(cls);

    auto* seg = app.add_subcommand("segment", "Classify (or read labels) and extract filtered polygons");
    seg->add_option("--cube", o.cube, "Input cube (.hsc)")->required();
    seg->add_option("--db", o.db, "Spectral database JSON");
    seg->add_option("--labels", o.labels, "16-bit label PNG to segment instead of classifying");
    seg->add_option("--out", o.out, "Output directory")->required();
    add_classify_flags(seg);
    add_segment_flags(seg, " (default 0; thickness default 1)");

    auto* mp = app.add_subcommand("map", "Ingest frames into a semantic map and export the ontology");
    mp->add_option("frames", o.frames, "Frame cubes in arrival order")->required();
    mp->add_option("--db", o.db, "Spectral database JSON")->required();
    mp->add_option("--out", o.out, "Output directory")->required();
    mp->add_option("--resolution-m", o.resolution_m, "Map cell size in meters")->capture_default_str()->check(CLI::PositiveNumber);
    add_classify_flags(mp);
    add_segment_flags(mp, " (default 0; thickness default 1)");

    auto* bench = app.add_subcommand("bench", "Per-stage timings for 2- and 5-class databases");
    bench->add_option("--classes", o.classes, "Database sizes to time")->capture_default_str()->check(CLI::Range(1, 5));
    bench->add_option("--cube", o.cube, "Benchmark this cube instead of a synthetic one");
    bench->add_option("--db", o.db, "Database for --cube (first N classes are used)");
    bench->add_option("--width", o.width, "Synthetic cube width (default 1886)")->check(CLI::PositiveNumber);
    bench->add_option("--height", o.height, "Synthetic cube height (default 1886)")->check(CLI::PositiveNumber);
    bench->add_option("--bands", o.bands, "Synthetic cube bands (default 164)")->check(CLI::PositiveNumber);
    bench->add_option("--repeat", o.repeat, "Runs per row, fastest is reported")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--seed", o.seed, "Synthetic scene seed")->capture_default_str();
    bench->add_option("--out", o.out, "Also write the rows as JSON to this file");
    add_classify_flags(bench);
    add_segment_flags(bench, " (default 0.01; thickness default 2)");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--cube", o.cube, "Input cube (.hsc)")->required();
    serve->add_option("--db", o.db, "Initial spectral database JSON");
    serve->add_option("--port", o.port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
    serve->add_option("--host", o.host, "Bind address")->capture_default_str();
    serve->add_option("--resolution-m", o.resolution_m, "Map cell size in meters")->capture_default_str()->check(CLI::PositiveNumber);

    // Bench defaults differ from the single-frame commands.
    bench->preparse_callback([&](std::size_t) {
        o.variance = 20.0;
        o.min_area_m2 = 0.01;
        o.thickness_px = 2.0;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.back()->help());
        return 2;
    }

    if (o.threads > 0) set_thread_count(o.threads);
    try {
        if (*gen) return run_gen_scene(o, gen_seed->count() > 0);
        if (*cls) return run_classify(o);
        if (*seg) return run_segment(o);
        if (*mp) return run_map(o);
        if (*bench) return run_bench(o);
        if (*serve) return run_serve(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
