#pragma once

#include <functional>
#include <string>

#include <json.hpp>

#include "hypermap/segmentation.hpp"
#include "hypermap/spectral_db.hpp"

namespace hypermap {

using PointMap = std::function<Point(Point)>;

/// Closed GeoJSON linear ring (first vertex repeated at the end).
inline nlohmann::json geojson_ring(const Ring& ring, const PointMap& map = {}) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : ring) {
        const Point q = map ? map(p) : p;
        out.push_back({q.x, q.y});
    }
    if (!ring.empty()) out.push_back(out.front());
    return out;
}

inline nlohmann::json geojson_polygon(const Ring& outer, const std::vector<Ring>& holes, const PointMap& map = {}) {
    nlohmann::json coords = nlohmann::json::array();
    coords.push_back(geojson_ring(outer, map));
    for (const auto& h : holes) coords.push_back(geojson_ring(h, map));
    return {{"type", "Polygon"}, {"coordinates", coords}};
}

inline std::string class_name_of(const SpectralDatabase& db, ClassId id) {
    if (id == kUnknown) return "Unknown";
    const auto* c = db.find(id);
    return c ? c->name : "class-" + std::to_string(id);
}

inline nlohmann::json class_color_of(const SpectralDatabase& db, ClassId id) {
    const auto* c = id == kUnknown ? nullptr : db.find(id);
    if (!c) return {0, 0, 0};
    return {c->color[0], c->color[1], c->color[2]};
}

/// FeatureCollection of region polygons. Coordinates are pixel corners
/// unless `map` converts them (e.g. to world meters).
inline nlohmann::json regions_to_geojson(const RegionSet& set, const SpectralDatabase& db, const PointMap& map = {}) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& r : set.regions) {
        nlohmann::json props = {{"region_id", r.id},
                                {"label_id", r.label},
                                {"class_name", class_name_of(db, r.label)},
                                {"color", class_color_of(db, r.label)},
                                {"pixel_count", r.pixel_count},
                                {"area_m2", r.area_m2 ? nlohmann::json(*r.area_m2) : nlohmann::json(nullptr)},
                                {"parent", r.parent ? nlohmann::json(*r.parent) : nlohmann::json(nullptr)},
                                {"vertex_count", r.outer.size() + [&] {
                                     std::size_t n = 0;
                                     for (const auto& h : r.holes) n += h.size();
                                     return n;
                                 }()}};
        features.push_back({{"type", "Feature"}, {"geometry", geojson_polygon(r.outer, r.holes, map)}, {"properties", props}});
    }
    return {{"type", "FeatureCollection"}, {"width", set.width}, {"height", set.height}, {"features", features}};
}

} // namespace hypermap
