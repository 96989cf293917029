#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hypermap/classifier.hpp"
#include "hypermap/cube.hpp"
#include "hypermap/error.hpp"
#include "hypermap/parallel.hpp"
#include "hypermap/polygon.hpp"
#include "hypermap/spectral_db.hpp"

namespace hypermap {

struct GaussianPeak {
    double amplitude = 0.0;
    double center_nm = 0.0;
    double width_nm = 1.0; // standard deviation
};

/// Reflectance profile at unit illumination: baseline + Σ Gaussian peaks.
struct ClassProfile {
    std::string name;
    Rgb color{0, 0, 0};
    std::vector<std::string> taxonomy; // empty: default taxonomy for the name
    double baseline = 0.0;
    std::vector<GaussianPeak> peaks;

    double at(double nm) const {
        double v = baseline;
        for (const auto& p : peaks) {
            const double z = (nm - p.center_nm) / p.width_nm;
            v += p.amplitude * std::exp(-0.5 * z * z);
        }
        return v;
    }
};

/// One labeled area: outer ring plus optional hole rings, even-odd.
struct SceneRegion {
    std::string class_name;
    std::vector<Ring> rings;
};

struct SceneSpec {
    int width = 256;
    int height = 256;
    std::vector<double> wavelengths_nm;
    std::vector<ClassProfile> classes;
    std::vector<SceneRegion> regions;
    double noise_sigma = 0.0;
    double illum_min = 1.0;
    double illum_max = 1.0;
    std::uint64_t seed = 0;
    SampleType dtype = SampleType::F32;
    CameraMeta camera{10.0, 35.0, {}};

    void validate() const {
        if (width <= 0 || height <= 0) throw InvalidArgument("scene dimensions must be positive");
        if (wavelengths_nm.empty()) throw InvalidArgument("scene needs at least one band");
        for (std::size_t i = 1; i < wavelengths_nm.size(); ++i)
            if (!(wavelengths_nm[i] > wavelengths_nm[i - 1]))
                throw InvalidArgument("scene wavelengths must be strictly increasing");
        if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
        if (!(illum_min > 0.0) || !(illum_min <= illum_max)) throw InvalidArgument("illumination needs 0 < min <= max");
        camera.validate();
        for (std::size_t i = 0; i < classes.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (classes[i].name == classes[j].name) throw InvalidArgument("duplicate class '" + classes[i].name + "'");
        for (const auto& r : regions) {
            if (!find_class(r.class_name)) throw InvalidArgument("region class '" + r.class_name + "' has no spectral profile");
            if (r.rings.empty()) throw InvalidArgument("region of class '" + r.class_name + "' has no rings");
            for (const auto& ring : r.rings)
                if (ring.size() < 3) throw InvalidArgument("region ring needs at least 3 vertices");
        }
    }

    const ClassProfile* find_class(std::string_view name) const {
        for (const auto& c : classes)
            if (c.name == name) return &c;
        return nullptr;
    }
};

struct Scene {
    HyperCube cube;
    LabelMap truth;
    SpectralDatabase db; // noise-free unit-illumination profiles, ids in class order
};

inline std::vector<double> linspace_nm(int bands, double lo, double hi) {
    if (bands <= 0) throw InvalidArgument("band count must be positive");
    std::vector<double> out(static_cast<std::size_t>(bands));
    for (int i = 0; i < bands; ++i) out[std::size_t(i)] = bands == 1 ? lo : lo + (hi - lo) * i / (bands - 1);
    return out;
}

namespace detail {

/// Pixel-center ownership: even-odd containment, a center on a region's
/// boundary goes to the first region listed, and two regions both strictly
/// containing a center is an overlap error.
inline LabelMap rasterize_scene(const SceneSpec& spec, const std::vector<ClassId>& region_ids) {
    LabelMap truth(spec.width, spec.height, kUnknown);
    struct Box {
        double x0, y0, x1, y1;
    };
    std::vector<Box> boxes;
    for (const auto& r : spec.regions) {
        Box b{INFINITY, INFINITY, -INFINITY, -INFINITY};
        for (const auto& ring : r.rings)
            for (const auto& p : ring) {
                b.x0 = std::min(b.x0, p.x), b.y0 = std::min(b.y0, p.y);
                b.x1 = std::max(b.x1, p.x), b.y1 = std::max(b.y1, p.y);
            }
        boxes.push_back(b);
    }
    parallel_for_blocks(std::size_t(spec.height), [&](std::size_t r0, std::size_t r1) {
        for (int y = int(r0); y < int(r1); ++y)
            for (int x = 0; x < spec.width; ++x) {
                const Point c{x + 0.5, y + 0.5};
                bool assigned = false;
                bool strictly_inside = false;
                for (std::size_t k = 0; k < spec.regions.size(); ++k) {
                    const Box& b = boxes[k];
                    if (c.x < b.x0 || c.x > b.x1 || c.y < b.y0 || c.y > b.y1) continue;
                    const auto& rings = spec.regions[k].rings;
                    const bool on_edge = point_on_boundary(c, rings);
                    const bool in = !on_edge && point_in_rings(c, rings);
                    if (in && strictly_inside)
                        throw InvalidArgument("scene regions overlap at pixel (" + std::to_string(x) + "," +
                                              std::to_string(y) + ")");
                    if ((in || on_edge) && !assigned) {
                        truth(x, y) = region_ids[k];
                        assigned = true;
                    }
                    strictly_inside = strictly_inside || in;
                }
            }
    });
    return truth;
}

} // namespace detail

/// Renders a cube: illumination(x,y) · profile(λ) + N(0, σ²) per band,
/// clamped to [0,1]. The illumination field is a bilinear interpolation of
/// an 8×8 seeded control grid; noise streams are seeded per row.
inline Scene synthesize(const SceneSpec& spec) {
    spec.validate();
    Scene scene;

    // References go through the cube's sample type so a unit-lit noiseless
    // pixel reads back bit-identical to its class reference.
    HyperCube probe = HyperCube::zeros(1, 1, {0.0}, spec.dtype, spec.camera);
    auto stored = [&](double v) {
        probe.set_value(0, std::clamp(v, 0.0, 1.0));
        return probe.value(0);
    };
    for (const auto& c : spec.classes) {
        Spectrum ref{spec.wavelengths_nm, {}};
        for (double nm : spec.wavelengths_nm) ref.values.push_back(stored(c.at(nm)));
        scene.db.add_class(c.name, c.color, std::move(ref), c.taxonomy);
    }
    std::vector<ClassId> region_ids;
    for (const auto& r : spec.regions) {
        const auto* c = scene.db.find(r.class_name);
        region_ids.push_back(c->id);
    }
    scene.truth = detail::rasterize_scene(spec, region_ids);

    const std::size_t nb = spec.wavelengths_nm.size();
    // Profile table indexed by class id; row 0 (Unknown) stays zero.
    std::vector<double> table(std::size_t(scene.db.next_id()) * nb, 0.0);
    for (const auto& c : scene.db.classes())
        std::copy(c.reference.values.begin(), c.reference.values.end(), table.begin() + std::ptrdiff_t(c.id * nb));

    constexpr int kGrid = 8;
    std::vector<double> control(kGrid * kGrid);
    {
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> u(spec.illum_min, spec.illum_max);
        for (auto& v : control) v = spec.illum_min == spec.illum_max ? spec.illum_min : u(rng);
    }
    auto illumination = [&](int x, int y) {
        const double gx = (x + 0.5) / spec.width * (kGrid - 1);
        const double gy = (y + 0.5) / spec.height * (kGrid - 1);
        const int i = std::min(kGrid - 2, int(gx));
        const int j = std::min(kGrid - 2, int(gy));
        const double fx = gx - i, fy = gy - j;
        const double a = control[std::size_t(j * kGrid + i)], b = control[std::size_t(j * kGrid + i + 1)];
        const double c = control[std::size_t((j + 1) * kGrid + i)], d = control[std::size_t((j + 1) * kGrid + i + 1)];
        const double v = (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
        return std::clamp(v, spec.illum_min, spec.illum_max);
    };

    scene.cube = HyperCube::zeros(spec.width, spec.height, spec.wavelengths_nm, spec.dtype, spec.camera);
    HyperCube& cube = scene.cube;
    parallel_for_blocks(std::size_t(spec.height), [&](std::size_t r0, std::size_t r1) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
        for (int y = int(r0); y < int(r1); ++y) {
            std::seed_seq seq{std::uint32_t(spec.seed), std::uint32_t(spec.seed >> 32), std::uint32_t(y), 0x5eedu};
            std::mt19937_64 rng(seq);
            noise.reset();
            for (int x = 0; x < spec.width; ++x) {
                const double light = illumination(x, y);
                const double* prof = table.data() + std::size_t(scene.truth(x, y)) * nb;
                const std::size_t base = (std::size_t(y) * std::size_t(spec.width) + std::size_t(x)) * nb;
                for (std::size_t b = 0; b < nb; ++b) {
                    double v = light * prof[b];
                    if (spec.noise_sigma > 0.0) v += noise(rng);
                    cube.set_value(base + b, std::clamp(v, 0.0, 1.0));
                }
            }
        }
    });
    return scene;
}

// ---------------------------------------------------------------------------
// JSON and bundled scenes

inline nlohmann::json to_json(const SceneSpec& spec) {
    using nlohmann::json;
    json classes = json::array();
    for (const auto& c : spec.classes) {
        json peaks = json::array();
        for (const auto& p : c.peaks) peaks.push_back({{"amplitude", p.amplitude}, {"center_nm", p.center_nm}, {"width_nm", p.width_nm}});
        json jc = {{"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}, {"baseline", c.baseline}, {"peaks", peaks}};
        if (!c.taxonomy.empty()) jc["taxonomy"] = c.taxonomy;
        classes.push_back(jc);
    }
    json regions = json::array();
    for (const auto& r : spec.regions) {
        json rings = json::array();
        for (const auto& ring : r.rings) {
            json pts = json::array();
            for (const auto& p : ring) pts.push_back({p.x, p.y});
            rings.push_back(pts);
        }
        regions.push_back({{"class", r.class_name}, {"rings", rings}});
    }
    return {{"width", spec.width},
            {"height", spec.height},
            {"wavelengths_nm", spec.wavelengths_nm},
            {"classes", classes},
            {"regions", regions},
            {"noise_sigma", spec.noise_sigma},
            {"illumination", {spec.illum_min, spec.illum_max}},
            {"seed", spec.seed},
            {"dtype", to_string(spec.dtype)},
            {"camera",
             {{"h_m", spec.camera.height_m},
              {"fov_deg", spec.camera.fov_deg},
              {"pose", {spec.camera.pose.x, spec.camera.pose.y, spec.camera.pose.yaw}}}}};
}

inline SceneSpec scene_from_json(const nlohmann::json& doc) {
    try {
        SceneSpec spec;
        spec.width = doc.at("width").get<int>();
        spec.height = doc.at("height").get<int>();
        if (doc.contains("wavelengths_nm")) {
            spec.wavelengths_nm = doc.at("wavelengths_nm").get<std::vector<double>>();
        } else {
            const auto& b = doc.at("bands_range");
            spec.wavelengths_nm = linspace_nm(b.at("bands").get<int>(), b.at("min_nm").get<double>(), b.at("max_nm").get<double>());
        }
        for (const auto& jc : doc.at("classes")) {
            ClassProfile c;
            c.name = jc.at("name").get<std::string>();
            const auto color = jc.at("color").get<std::vector<int>>();
            if (color.size() != 3) throw InvalidArgument("class color must be [r,g,b]");
            for (int k = 0; k < 3; ++k) c.color[std::size_t(k)] = std::uint8_t(std::clamp(color[std::size_t(k)], 0, 255));
            c.taxonomy = jc.value("taxonomy", std::vector<std::string>{});
            c.baseline = jc.value("baseline", 0.0);
            for (const auto& jp : jc.value("peaks", nlohmann::json::array()))
                c.peaks.push_back({jp.at("amplitude").get<double>(), jp.at("center_nm").get<double>(), jp.at("width_nm").get<double>()});
            spec.classes.push_back(std::move(c));
        }
        for (const auto& jr : doc.at("regions")) {
            SceneRegion r;
            r.class_name = jr.at("class").get<std::string>();
            for (const auto& jring : jr.at("rings")) {
                Ring ring;
                for (const auto& p : jring) ring.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                r.rings.push_back(std::move(ring));
            }
            spec.regions.push_back(std::move(r));
        }
        spec.noise_sigma = doc.value("noise_sigma", 0.0);
        if (doc.contains("illumination")) {
            const auto il = doc.at("illumination").get<std::vector<double>>();
            if (il.size() != 2) throw InvalidArgument("illumination must be [min, max]");
            spec.illum_min = il[0];
            spec.illum_max = il[1];
        }
        spec.seed = doc.value("seed", std::uint64_t{0});
        spec.dtype = parse_sample_type(doc.value("dtype", std::string("f32")));
        if (doc.contains("camera")) {
            const auto& jc = doc.at("camera");
            spec.camera.height_m = jc.at("h_m").get<double>();
            spec.camera.fov_deg = jc.at("fov_deg").get<double>();
            if (jc.contains("pose")) {
                const auto pose = jc.at("pose").get<std::vector<double>>();
                if (pose.size() != 3) throw InvalidArgument("camera pose must be [x, y, yaw]");
                spec.camera.pose = {pose[0], pose[1], pose[2]};
            }
        }
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed scene spec: ") + e.what());
    }
}

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    try {
        return scene_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("malformed scene JSON: ") + e.what());
    }
}

/// Stand-in spectra for the bundled scenes.
inline std::vector<ClassProfile> default_class_profiles() {
    return {
        {"Concrete", {150, 150, 150}, {}, 0.20, {{0.115, 645, 255}}},
        {"Ground", {140, 90, 50}, {}, 0.15, {{0.29, 790, 180}}},
        {"Vegetation", {40, 160, 40}, {}, 0.09, {{0.10, 550, 30}, {0.36, 820, 145}}},
        {"Water", {30, 80, 200}, {}, 0.14, {{0.36, 485, 50}}},
        {"Wood", {120, 70, 20}, {}, 0.134, {{0.17, 685, 140}, {0.05, 820, 60}}},
        {"Tarp", {255, 140, 0}, {}, 0.12, {{0.50, 590, 22}}},
    };
}

/// Bundled layouts: "cornfields-like" (Concrete, Ground, Vegetation, Water,
/// Wood) and "runtime-add" (the same plus a Tarp patch inside the vegetation).
/// Geometry is defined on the unit square and scaled to width×height.
inline SceneSpec builtin_scene(std::string_view name, int width = 256, int height = 256, int bands = 64) {
    const bool with_tarp = name == "runtime-add";
    if (!with_tarp && name != "cornfields-like") throw InvalidArgument("unknown builtin scene '" + std::string(name) + "'");
    SceneSpec spec;
    spec.width = width;
    spec.height = height;
    spec.wavelengths_nm = linspace_nm(bands, 400.0, 1000.0);
    for (auto& c : default_class_profiles())
        if (with_tarp || c.name != "Tarp") spec.classes.push_back(c);
    spec.illum_min = 0.5;
    spec.illum_max = 1.5;
    spec.seed = 1;

    auto scale = [&](std::initializer_list<std::pair<double, double>> pts) {
        Ring ring;
        for (auto [u, v] : pts) ring.push_back({u * width, v * height});
        return ring;
    };
    const Ring wood = scale({{0.72, 0.10}, {0.90, 0.13}, {0.87, 0.30}, {0.74, 0.27}});
    const Ring tarp = scale({{0.12, 0.35}, {0.28, 0.33}, {0.30, 0.52}, {0.14, 0.55}});
    Ring vegetation = scale({{0.0, 0.0}, {0.50, 0.0}, {0.42, 0.35}, {0.48, 0.65}, {0.40, 1.0}, {0.0, 1.0}});
    spec.regions.push_back({"Vegetation", with_tarp ? std::vector<Ring>{vegetation, tarp} : std::vector<Ring>{vegetation}});
    spec.regions.push_back({"Ground", {scale({{0.50, 0.0}, {1.0, 0.0}, {1.0, 0.45}, {0.70, 0.50}, {0.42, 0.35}}), wood}});
    spec.regions.push_back({"Wood", {wood}});
    spec.regions.push_back({"Concrete", {scale({{0.42, 0.35}, {0.70, 0.50}, {1.0, 0.45}, {1.0, 0.75}, {0.48, 0.65}})}});
    spec.regions.push_back({"Water", {scale({{0.48, 0.65}, {1.0, 0.75}, {1.0, 1.0}, {0.40, 1.0}})}});
    if (with_tarp) spec.regions.push_back({"Tarp", {tarp}});
    return spec;
}

} // namespace hypermap
