#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypermap/geojson.hpp"
#include "hypermap/geometry.hpp"
#include "hypermap/png.hpp"
#include "hypermap/segmentation.hpp"
#include "hypermap/spectral_db.hpp"

namespace hypermap {

inline constexpr double kDefaultMapResolution = 0.05; // m per cell

/// Taxonomy tree keyed by '/'-joined paths ("World/Landscape/Water").
class InstanceLabelTree {
public:
    InstanceLabelTree() { nodes_.insert(std::string(kTaxonomyRoot)); }

    void add_path(const std::vector<std::string>& path) {
        if (path.empty() || path.front() != kTaxonomyRoot) throw InvalidArgument("taxonomy path must start at World");
        std::string key;
        for (const auto& n : path) {
            if (n.empty() || n.find('/') != std::string::npos) throw InvalidArgument("invalid taxonomy node '" + n + "'");
            key += key.empty() ? n : "/" + n;
            nodes_.insert(key);
        }
    }

    bool contains(const std::string& key) const { return nodes_.count(key) != 0; }

    /// Every node key, parents before children, siblings sorted.
    std::vector<std::string> nodes() const {
        std::vector<std::string> out;
        walk(std::string(kTaxonomyRoot), out);
        return out;
    }

    std::vector<std::string> children(const std::string& key) const {
        std::vector<std::string> out;
        const std::string prefix = key + "/";
        for (auto it = nodes_.lower_bound(prefix); it != nodes_.end() && it->compare(0, prefix.size(), prefix) == 0; ++it)
            if (it->find('/', prefix.size()) == std::string::npos) out.push_back(*it);
        return out;
    }

    static std::string leaf(const std::string& key) { return key.substr(key.rfind('/') + 1); }
    static std::string join(const std::vector<std::string>& path) {
        std::string key;
        for (const auto& n : path) key += key.empty() ? n : "/" + n;
        return key;
    }

private:
    void walk(const std::string& key, std::vector<std::string>& out) const {
        out.push_back(key);
        for (const auto& c : children(key)) walk(c, out);
    }

    std::set<std::string> nodes_;
};

struct MapClass {
    std::string name;
    Rgb color{0, 0, 0};
    std::vector<std::string> taxonomy;
    friend bool operator==(const MapClass&, const MapClass&) = default;
};

struct FrameRecord {
    std::string frame_id;
    CameraMeta camera;
    int width = 0;
    int height = 0;
    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// Map entity: one connected same-class area in world meters.
struct Feature {
    std::string id; // "<class>@<gx>,<gy>": class plus the global cell of its top-left cell
    ClassId label = kUnknown;
    std::string class_name;
    std::string instance_label; // taxonomy key
    Ring outer;                 // world meters, counter-clockwise (y up)
    std::vector<Ring> holes;
    double area_m2 = 0.0;
    std::size_t cell_count = 0;
    std::vector<std::string> source_frames;
};

/// Global raster merged from frames. Cell (gx, gy) covers
/// [gx·res, (gx+1)·res) × [gy·res, (gy+1)·res) in world meters; the stored
/// image has row 0 at the top (largest gy).
class SemanticMap {
public:
    explicit SemanticMap(double resolution_m = kDefaultMapResolution) : res_(resolution_m) {
        if (!(resolution_m > 0.0) || !std::isfinite(resolution_m)) throw InvalidArgument("map resolution must be > 0");
    }

    double resolution() const { return res_; }
    bool empty() const { return grid_.data.empty(); }
    const LabelMap& grid() const { return grid_; }
    /// Per cell: 1 + index into frames() of the frame that last wrote it, 0 if none.
    const Image<std::uint16_t>& writers() const { return writers_; }
    long gx0() const { return gx0_; }
    long gy_top() const { return gy1_; } // exclusive upper gy bound
    const std::vector<FrameRecord>& frames() const { return frames_; }
    const std::map<ClassId, MapClass>& classes() const { return classes_; }

    std::size_t known_cells() const {
        return std::size_t(std::count_if(grid_.data.begin(), grid_.data.end(), [](ClassId c) { return c != kUnknown; }));
    }

    /// World point to fractional cell coordinates (col right, row down).
    Point world_to_cell(WorldPoint w) const { return {w.x / res_ - double(gx0_), double(gy1_) - w.y / res_}; }
    WorldPoint cell_to_world(Point c) const { return {(double(gx0_) + c.x) * res_, (double(gy1_) - c.y) * res_}; }

    /// Registers class names, colors and taxonomy from a database snapshot.
    void register_classes(const SpectralDatabase& db) {
        for (const auto& c : db.classes()) classes_[c.id] = {c.name, c.color, c.taxonomy};
    }

    void set_class(ClassId id, MapClass c) { classes_[id] = std::move(c); }

    /// Rasterizes a frame's region polygons (pixel corners) into the grid.
    /// Later frames overwrite earlier ones; Unknown never overwrites.
    void ingest_frame(const RegionSet& regions, const CameraMeta& camera, const std::string& frame_id) {
        camera.validate();
        if (regions.width <= 0 || regions.height <= 0) throw InvalidArgument("frame has no pixels");
        if (frames_.size() >= 0xfffe) throw InvalidArgument("frame log is full");
        const PixelToWorld to_world(regions.width, regions.height, camera);

        // Footprint bounding box in global cells.
        double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
        for (Point c : {Point{0, 0}, Point{double(regions.width), 0}, Point{0, double(regions.height)},
                        Point{double(regions.width), double(regions.height)}}) {
            const WorldPoint w = to_world(c);
            xmin = std::min(xmin, w.x), xmax = std::max(xmax, w.x);
            ymin = std::min(ymin, w.y), ymax = std::max(ymax, w.y);
        }
        constexpr double eps = 1e-9;
        grow(long(std::floor(xmin / res_ + eps)), long(std::ceil(xmax / res_ - eps)), long(std::floor(ymin / res_ + eps)),
             long(std::ceil(ymax / res_ - eps)));

        // Frame-local composite first, so overlapping approximated polygons of
        // one frame resolve in region order before touching the map.
        LabelMap frame(grid_.width, grid_.height, kUnknown);
        std::vector<Ring> rings;
        for (const auto& r : regions.regions) {
            if (r.label == kUnknown) continue;
            rings.clear();
            auto convert = [&](const Ring& src) {
                Ring out;
                out.reserve(src.size());
                for (const auto& p : src) out.push_back(world_to_cell(to_world(p)));
                return out;
            };
            rings.push_back(convert(r.outer));
            for (const auto& h : r.holes) rings.push_back(convert(h));
            rasterize_rings(rings, grid_.width, grid_.height, [&](int x, int y) { frame(x, y) = r.label; });
        }
        frames_.push_back({frame_id, camera, regions.width, regions.height});
        const auto writer = std::uint16_t(frames_.size());
        for (std::size_t i = 0; i < frame.size(); ++i)
            if (frame.data[i] != kUnknown) {
                grid_.data[i] = frame.data[i];
                writers_.data[i] = writer;
            }
    }

    /// Connected same-class areas of the grid as world-frame features.
    std::vector<Feature> extract_features() const {
        std::vector<Feature> out;
        if (empty()) return out;
        const RegionSet set = extract_regions(grid_);
        // Frames that contributed visible cells, per region: label the grid
        // by region via rasterization of its rings.
        std::vector<std::set<std::uint16_t>> writers(set.regions.size());
        {
            Image<int> owner(grid_.width, grid_.height, -1);
            for (std::size_t k = 0; k < set.regions.size(); ++k) {
                const auto& r = set.regions[k];
                if (r.label == kUnknown) continue;
                std::vector<Ring> rings{r.outer};
                rings.insert(rings.end(), r.holes.begin(), r.holes.end());
                rasterize_rings(rings, grid_.width, grid_.height, [&](int x, int y) { owner(x, y) = int(k); });
            }
            for (std::size_t i = 0; i < owner.size(); ++i)
                if (owner.data[i] >= 0 && writers_.data[i] != 0) writers[std::size_t(owner.data[i])].insert(writers_.data[i]);
        }
        for (std::size_t k = 0; k < set.regions.size(); ++k) {
            const auto& r = set.regions[k];
            if (r.label == kUnknown) continue;
            Feature f;
            f.label = r.label;
            auto it = classes_.find(r.label);
            f.class_name = it != classes_.end() ? it->second.name : "class-" + std::to_string(r.label);
            f.instance_label = InstanceLabelTree::join(it != classes_.end() ? it->second.taxonomy
                                                                           : default_taxonomy_path(f.class_name));
            const long gx = gx0_ + r.first_x;
            const long gy = gy1_ - 1 - r.first_y;
            f.id = f.class_name + "@" + std::to_string(gx) + "," + std::to_string(gy);
            auto convert = [&](const Ring& src) {
                Ring ring;
                ring.reserve(src.size());
                for (const auto& p : src) ring.push_back(cell_to_world(p));
                return ring;
            };
            f.outer = convert(r.outer);
            for (const auto& h : r.holes) f.holes.push_back(convert(h));
            f.cell_count = r.pixel_count;
            f.area_m2 = double(r.pixel_count) * res_ * res_;
            for (std::uint16_t w : writers[k]) f.source_frames.push_back(frames_[w - 1].frame_id);
            out.push_back(std::move(f));
        }
        std::sort(out.begin(), out.end(), [](const Feature& a, const Feature& b) { return a.id < b.id; });
        return out;
    }

    /// Taxonomy from the registered classes' paths.
    InstanceLabelTree label_tree() const {
        InstanceLabelTree tree;
        for (const auto& [id, c] : classes_) tree.add_path(c.taxonomy.empty() ? default_taxonomy_path(c.name) : c.taxonomy);
        return tree;
    }

    friend bool operator==(const SemanticMap&, const SemanticMap&) = default;

    // Persistence hooks.
    void restore(long gx0, long gy1, LabelMap grid, Image<std::uint16_t> writers, std::vector<FrameRecord> frames,
                 std::map<ClassId, MapClass> classes) {
        if (grid.width != writers.width || grid.height != writers.height)
            throw InvalidArgument("map grid and writer raster differ in size");
        for (auto w : writers.data)
            if (w > frames.size()) throw InvalidArgument("map writer raster refers to an unknown frame");
        gx0_ = gx0;
        gy1_ = gy1;
        grid_ = std::move(grid);
        writers_ = std::move(writers);
        frames_ = std::move(frames);
        classes_ = std::move(classes);
    }

private:
    /// Grows the bounding box to include cells [x0, x1) × [y0, y1).
    void grow(long x0, long x1, long y0, long y1) {
        if (empty()) {
            gx0_ = x0;
            gy1_ = y1;
            grid_ = LabelMap(int(x1 - x0), int(y1 - y0), kUnknown);
            writers_ = Image<std::uint16_t>(grid_.width, grid_.height, 0);
            return;
        }
        const long cur_x1 = gx0_ + grid_.width;
        const long cur_y0 = gy1_ - grid_.height;
        const long nx0 = std::min(x0, gx0_), nx1 = std::max(x1, cur_x1);
        const long ny0 = std::min(y0, cur_y0), ny1 = std::max(y1, gy1_);
        if (nx0 == gx0_ && nx1 == cur_x1 && ny0 == cur_y0 && ny1 == gy1_) return;
        if ((nx1 - nx0) * (ny1 - ny0) > (1L << 31)) throw InvalidArgument("map extent too large for its resolution");
        LabelMap g(int(nx1 - nx0), int(ny1 - ny0), kUnknown);
        Image<std::uint16_t> w(g.width, g.height, 0);
        const int dx = int(gx0_ - nx0), dy = int(ny1 - gy1_);
        for (int y = 0; y < grid_.height; ++y)
            for (int x = 0; x < grid_.width; ++x) {
                g(x + dx, y + dy) = grid_(x, y);
                w(x + dx, y + dy) = writers_(x, y);
            }
        gx0_ = nx0;
        gy1_ = ny1;
        grid_ = std::move(g);
        writers_ = std::move(w);
    }

    double res_;
    long gx0_ = 0;
    long gy1_ = 0;
    LabelMap grid_;
    Image<std::uint16_t> writers_;
    std::vector<FrameRecord> frames_;
    std::map<ClassId, MapClass> classes_;
};

// ---------------------------------------------------------------------------
// Ontology export

struct OntologyNode {
    std::string id;
    std::string kind; // "taxonomy" or "instance"
    std::string label;
    std::optional<double> area_m2;
    std::string shape; // instance nodes: feature id in the map's GeoJSON
};

struct OntologyEdge {
    std::string from, to, kind; // "subclass" or "instance"
};

struct Ontology {
    std::vector<OntologyNode> nodes;
    std::vector<OntologyEdge> edges;
};

inline Ontology build_ontology(const SemanticMap& map, const std::vector<Feature>& features) {
    Ontology g;
    InstanceLabelTree tree = map.label_tree();
    for (const auto& f : features) tree.add_path([&] {
        std::vector<std::string> path;
        std::stringstream ss(f.instance_label);
        for (std::string part; std::getline(ss, part, '/');) path.push_back(part);
        return path;
    }());
    for (const auto& key : tree.nodes()) {
        g.nodes.push_back({key, "taxonomy", InstanceLabelTree::leaf(key), std::nullopt, {}});
        for (const auto& c : tree.children(key)) g.edges.push_back({key, c, "subclass"});
    }
    std::vector<const Feature*> sorted;
    for (const auto& f : features) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [](const Feature* a, const Feature* b) { return a->id < b->id; });
    for (const Feature* f : sorted) {
        const std::string id = "feature:" + f->id;
        g.nodes.push_back({id, "instance", f->id, f->area_m2, f->id});
        g.edges.push_back({f->instance_label, id, "instance"});
    }
    return g;
}

inline nlohmann::json ontology_json(const Ontology& g) {
    nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
    for (const auto& n : g.nodes) {
        nlohmann::json j = {{"id", n.id}, {"kind", n.kind}, {"label", n.label}};
        if (n.area_m2) j["area_m2"] = *n.area_m2;
        if (!n.shape.empty()) j["shape"] = n.shape;
        nodes.push_back(j);
    }
    for (const auto& e : g.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", e.kind}});
    return {{"nodes", nodes}, {"edges", edges}};
}

inline std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string ontology_dot(const Ontology& g) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out << "digraph ontology {\n  rankdir=TB;\n";
    for (const auto& n : g.nodes) {
        out << "  " << dot_quote(n.id) << " [";
        if (n.kind == "taxonomy") {
            out << "shape=box, label=" << dot_quote(n.label);
        } else {
            char area[64];
            std::snprintf(area, sizeof area, "%.4f", n.area_m2.value_or(0.0));
            std::string label = dot_quote(n.label);
            label.insert(label.size() - 1, std::string("\\n") + area + " m2"); // DOT line break, not an escaped backslash
            out << "shape=ellipse, label=" << label << ", area_m2=" << area;
        }
        out << "];\n";
    }
    for (const auto& e : g.edges)
        out << "  " << dot_quote(e.from) << " -> " << dot_quote(e.to) << " [label=" << dot_quote(e.kind) << "];\n";
    out << "}\n";
    return out.str();
}

/// World-meter FeatureCollection of map features.
inline nlohmann::json features_to_geojson(const std::vector<Feature>& features, const SemanticMap& map) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : features) {
        nlohmann::json color = {0, 0, 0};
        if (auto it = map.classes().find(f.label); it != map.classes().end())
            color = {it->second.color[0], it->second.color[1], it->second.color[2]};
        out.push_back({{"type", "Feature"},
                       {"id", f.id},
                       {"geometry", geojson_polygon(f.outer, f.holes)},
                       {"properties",
                        {{"label_id", f.label},
                         {"class_name", f.class_name},
                         {"instance_label", f.instance_label},
                         {"color", color},
                         {"pixel_count", f.cell_count},
                         {"area_m2", f.area_m2},
                         {"source_frames", f.source_frames}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", out}};
}

// ---------------------------------------------------------------------------
// Persistence: grid.png (16-bit ids), writers.png (16-bit frame refs), manifest.json

inline void save_map(const SemanticMap& map, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [id, c] : map.classes())
        classes.push_back({{"id", id}, {"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}, {"taxonomy", c.taxonomy}});
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& f : map.frames())
        frames.push_back({{"frame_id", f.frame_id},
                          {"width", f.width},
                          {"height", f.height},
                          {"h_m", f.camera.height_m},
                          {"fov_deg", f.camera.fov_deg},
                          {"pose", {f.camera.pose.x, f.camera.pose.y, f.camera.pose.yaw}}});
    const nlohmann::json manifest = {{"resolution_m", map.resolution()},
                                     {"gx0", map.gx0()},
                                     {"gy_top", map.gy_top()},
                                     {"width", map.grid().width},
                                     {"height", map.grid().height},
                                     {"classes", classes},
                                     {"frames", frames}};
    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write map manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
    if (!map.empty()) {
        png::write_file(dir / "grid.png", png::encode_gray16(map.grid()));
        png::write_file(dir / "writers.png", png::encode_gray16(map.writers()));
    }
}

inline SemanticMap load_map(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open map manifest in " + dir.string());
    try {
        const auto j = nlohmann::json::parse(in);
        SemanticMap map(j.at("resolution_m").get<double>());
        std::map<ClassId, MapClass> classes;
        for (const auto& c : j.at("classes")) {
            const auto color = c.at("color").get<std::vector<int>>();
            if (color.size() != 3) throw InvalidArgument("map class color must be [r,g,b]");
            classes[ClassId(c.at("id").get<int>())] = {c.at("name").get<std::string>(),
                                                       {std::uint8_t(color[0]), std::uint8_t(color[1]), std::uint8_t(color[2])},
                                                       c.at("taxonomy").get<std::vector<std::string>>()};
        }
        std::vector<FrameRecord> frames;
        for (const auto& f : j.at("frames")) {
            const auto pose = f.at("pose").get<std::vector<double>>();
            if (pose.size() != 3) throw InvalidArgument("frame pose must be [x, y, yaw]");
            frames.push_back({f.at("frame_id").get<std::string>(),
                              {f.at("h_m").get<double>(), f.at("fov_deg").get<double>(), {pose[0], pose[1], pose[2]}},
                              f.at("width").get<int>(),
                              f.at("height").get<int>()});
        }
        LabelMap grid;
        Image<std::uint16_t> writers;
        if (j.at("width").get<int>() > 0) {
            grid = png::decode_gray16(png::read_file(dir / "grid.png"));
            writers = png::decode_gray16(png::read_file(dir / "writers.png"));
            if (grid.width != j.at("width").get<int>() || grid.height != j.at("height").get<int>())
                throw InvalidArgument("map grid size disagrees with its manifest");
        }
        map.restore(j.at("gx0").get<long>(), j.at("gy_top").get<long>(), std::move(grid), std::move(writers), std::move(frames),
                    std::move(classes));
        return map;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed map manifest: ") + e.what());
    }
}

} // namespace hypermap
