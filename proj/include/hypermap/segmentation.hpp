#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "hypermap/classifier.hpp"
#include "hypermap/error.hpp"
#include "hypermap/geometry.hpp"
#include "hypermap/image.hpp"
#include "hypermap/parallel.hpp"
#include "hypermap/polygon.hpp"

namespace hypermap {

/// 1 where a pixel's 8-neighborhood holds a different label, else 0.
using EdgeImage = Image<std::uint8_t>;

/// Connected same-label component (8-connectivity) with its crack-traced
/// boundary. Rings use pixel-corner coordinates; the outer ring runs
/// counter-clockwise as seen on screen (y down), holes clockwise.
struct Region {
    int id = 0;
    ClassId label = kUnknown;
    Ring outer;
    std::vector<Ring> holes;
    std::size_t pixel_count = 0;
    std::optional<int> parent;
    std::optional<double> area_m2;
    int first_x = 0; // top-left owned pixel (raster order)
    int first_y = 0;

    friend bool operator==(const Region&, const Region&) = default;
};

struct RegionSet {
    int width = 0;
    int height = 0;
    std::vector<Region> regions;

    std::size_t total_pixels() const {
        std::size_t n = 0;
        for (const auto& r : regions) n += r.pixel_count;
        return n;
    }
    std::size_t vertex_count() const {
        std::size_t n = 0;
        for (const auto& r : regions) {
            n += r.outer.size();
            for (const auto& h : r.holes) n += h.size();
        }
        return n;
    }
    friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

// ---------------------------------------------------------------------------
// Edge detection

inline EdgeImage detect_edges(const LabelMap& map) {
    EdgeImage edges(map.width, map.height, 0);
    const int w = map.width;
    const int h = map.height;
    parallel_for_blocks(std::size_t(h), [&](std::size_t r0, std::size_t r1) {
        for (int y = int(r0); y < int(r1); ++y) {
            const bool border_row = y == 0 || y == h - 1;
            for (int x = 0; x < w; ++x) {
                // Out-of-image neighbors carry a sentinel label, so border pixels are edges.
                if (border_row || x == 0 || x == w - 1) {
                    edges(x, y) = 1;
                    continue;
                }
                const ClassId c = map(x, y);
                const bool same = map(x - 1, y - 1) == c && map(x, y - 1) == c && map(x + 1, y - 1) == c &&
                                  map(x - 1, y) == c && map(x + 1, y) == c && map(x - 1, y + 1) == c &&
                                  map(x, y + 1) == c && map(x + 1, y + 1) == c;
                edges(x, y) = same ? 0 : 1;
            }
        }
    });
    return edges;
}

// ---------------------------------------------------------------------------
// Region extraction by crack following

namespace detail {

struct Extraction {
    RegionSet set;
    std::vector<std::int32_t> component; // per pixel, index into set.regions
};

// Headings on the pixel-corner lattice (y down): E, S, W, N.
inline constexpr std::array<int, 4> kDx{1, 0, -1, 0};
inline constexpr std::array<int, 4> kDy{0, 1, 0, -1};
inline constexpr int kEast = 0, kSouth = 1, kWest = 2, kNorth = 3;

// Pixel side bits marking cracks already traced.
inline constexpr std::uint8_t kTop = 1, kLeft = 2, kRight = 4, kBottom = 8;

class CrackTracer {
public:
    CrackTracer(int width, int height, const std::vector<std::int32_t>& component)
        : w_(width), h_(height), comp_(component), flags_(std::size_t(width) * std::size_t(height), 0) {}

    bool is_boundary(int x, int y, std::uint8_t side) const {
        const std::int32_t c = comp_[idx(x, y)];
        switch (side) {
        case kTop: return y == 0 || comp_[idx(x, y - 1)] != c;
        case kBottom: return y == h_ - 1 || comp_[idx(x, y + 1)] != c;
        case kLeft: return x == 0 || comp_[idx(x - 1, y)] != c;
        default: return x == w_ - 1 || comp_[idx(x + 1, y)] != c;
        }
    }

    bool visited(int x, int y, std::uint8_t side) const { return flags_[idx(x, y)] & side; }

    /// Follows the boundary starting at the given pixel side with the component
    /// on the left. At a pinch (diagonal contact) it turns toward the
    /// diagonal cell so 8-connected pixels stay inside one ring.
    Ring trace(int px, int py, std::uint8_t side) {
        const std::int32_t c = comp_[idx(px, py)];
        int vx, vy, d0;
        switch (side) {
        case kTop: vx = px + 1, vy = py, d0 = kWest; break;
        case kBottom: vx = px, vy = py + 1, d0 = kEast; break;
        case kLeft: vx = px, vy = py, d0 = kSouth; break;
        default: vx = px + 1, vy = py + 1, d0 = kNorth; break;
        }
        const int sx = vx, sy = vy;
        mark(vx, vy, d0);
        vx += kDx[std::size_t(d0)];
        vy += kDy[std::size_t(d0)];
        int d = d0;

        std::vector<std::pair<int, int>> corners;
        for (;;) {
            const int right = (d + 1) & 3;
            const int left = (d + 3) & 3;
            int nd;
            if (inside(c, vx, vy, d, right))
                nd = right;
            else if (inside(c, vx, vy, d, left))
                nd = d;
            else
                nd = left;
            if (nd != d) corners.emplace_back(vx, vy);
            if (vx == sx && vy == sy && nd == d0) break;
            mark(vx, vy, nd);
            vx += kDx[std::size_t(nd)];
            vy += kDy[std::size_t(nd)];
            d = nd;
        }

        // Start at the top-most, then left-most corner.
        auto first = std::min_element(corners.begin(), corners.end(), [](const auto& a, const auto& b) {
            return a.second != b.second ? a.second < b.second : a.first < b.first;
        });
        std::rotate(corners.begin(), first, corners.end());
        Ring ring;
        ring.reserve(corners.size());
        for (auto [x, y] : corners) ring.push_back({double(x), double(y)});
        return ring;
    }

private:
    std::size_t idx(int x, int y) const { return std::size_t(y) * std::size_t(w_) + std::size_t(x); }

    bool in_comp(std::int32_t c, int x, int y) const {
        return x >= 0 && y >= 0 && x < w_ && y < h_ && comp_[idx(x, y)] == c;
    }

    // Cell in the quadrant ahead of vertex (vx,vy) along heading d, on the side given by heading `side`.
    bool inside(std::int32_t c, int vx, int vy, int d, int side) const {
        const int qx = kDx[std::size_t(d)] + kDx[std::size_t(side)];
        const int qy = kDy[std::size_t(d)] + kDy[std::size_t(side)];
        return in_comp(c, vx + (qx < 0 ? -1 : 0), vy + (qy < 0 ? -1 : 0));
    }

    void mark(int vx, int vy, int heading) {
        int x, y;
        std::uint8_t side;
        switch (heading) {
        case kEast: x = vx, y = vy - 1, side = kBottom; break;
        case kWest: x = vx - 1, y = vy, side = kTop; break;
        case kSouth: x = vx, y = vy, side = kLeft; break;
        default: x = vx - 1, y = vy - 1, side = kRight; break;
        }
        flags_[idx(x, y)] |= side;
    }

    int w_, h_;
    const std::vector<std::int32_t>& comp_;
    std::vector<std::uint8_t> flags_;
};

/// Parent of a region: owner of the innermost hole ring containing the
/// center of its first pixel. Computed with one left-to-right sweep per row
/// over the vertical edges of every hole ring.
inline void assign_parents(RegionSet& set) {
    struct Crossing {
        int x;
        std::int32_t hole;
    };
    struct HoleRef {
        std::int32_t owner;
        double area;
    };
    std::vector<HoleRef> holes;
    std::vector<std::vector<Crossing>> rows(std::size_t(set.height));
    for (const auto& r : set.regions) {
        for (const auto& ring : r.holes) {
            const auto hid = std::int32_t(holes.size());
            holes.push_back({r.id, std::abs(signed_area(ring))});
            for (std::size_t i = 0; i < ring.size(); ++i) {
                const Point& a = ring[i];
                const Point& b = ring[(i + 1) % ring.size()];
                if (a.x != b.x) continue;
                const int y0 = int(std::min(a.y, b.y));
                const int y1 = int(std::max(a.y, b.y));
                for (int y = y0; y < y1; ++y) rows[std::size_t(y)].push_back({int(a.x), hid});
            }
        }
    }
    if (holes.empty()) return;

    // Regions are already in raster order of their first pixel.
    std::size_t next = 0;
    std::vector<char> inside(holes.size(), 0);
    std::set<std::pair<double, std::int32_t>> open;
    for (int y = 0; y < set.height && next < set.regions.size(); ++y) {
        auto& xs = rows[std::size_t(y)];
        std::sort(xs.begin(), xs.end(), [](const Crossing& a, const Crossing& b) { return a.x < b.x; });
        std::size_t k = 0;
        while (next < set.regions.size() && set.regions[next].first_y == y) {
            Region& r = set.regions[next++];
            for (; k < xs.size() && xs[std::size_t(k)].x <= r.first_x; ++k) {
                const auto hid = xs[k].hole;
                const std::pair<double, std::int32_t> key{holes[std::size_t(hid)].area, hid};
                if ((inside[std::size_t(hid)] ^= 1))
                    open.insert(key);
                else
                    open.erase(key);
            }
            if (!open.empty()) r.parent = holes[std::size_t(open.begin()->second)].owner;
        }
        for (; k < xs.size(); ++k) {
            const auto hid = xs[k].hole;
            const std::pair<double, std::int32_t> key{holes[std::size_t(hid)].area, hid};
            if ((inside[std::size_t(hid)] ^= 1))
                open.insert(key);
            else
                open.erase(key);
        }
    }
}

inline Extraction extract(const LabelMap& map) {
    const int w = map.width;
    const int h = map.height;
    Extraction ex;
    ex.set.width = w;
    ex.set.height = h;
    if (w == 0 || h == 0) return ex;
    const std::size_t n = std::size_t(w) * std::size_t(h);
    ex.component.assign(n, -1);
    auto& regions = ex.set.regions;

    // 8-connected components, numbered in raster order of their first pixel.
    std::vector<std::int32_t> stack;
    for (std::size_t p = 0; p < n; ++p) {
        if (ex.component[p] >= 0) continue;
        const auto id = std::int32_t(regions.size());
        Region r;
        r.id = id;
        r.label = map.data[p];
        r.first_x = int(p % std::size_t(w));
        r.first_y = int(p / std::size_t(w));
        std::size_t count = 0;
        ex.component[p] = id;
        stack.push_back(std::int32_t(p));
        while (!stack.empty()) {
            const std::size_t q = std::size_t(stack.back());
            stack.pop_back();
            ++count;
            const int qx = int(q % std::size_t(w));
            const int qy = int(q / std::size_t(w));
            for (int dy = -1; dy <= 1; ++dy) {
                const int ny = qy + dy;
                if (ny < 0 || ny >= h) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = qx + dx;
                    if ((dx == 0 && dy == 0) || nx < 0 || nx >= w) continue;
                    const std::size_t nq = std::size_t(ny) * std::size_t(w) + std::size_t(nx);
                    if (ex.component[nq] < 0 && map.data[nq] == r.label) {
                        ex.component[nq] = id;
                        stack.push_back(std::int32_t(nq));
                    }
                }
            }
        }
        r.pixel_count = count;
        regions.push_back(std::move(r));
    }

    CrackTracer tracer(w, h, ex.component);
    std::vector<char> started(regions.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t c = ex.component[std::size_t(y) * std::size_t(w) + std::size_t(x)];
            Region& r = regions[std::size_t(c)];
            if (!started[std::size_t(c)]) {
                started[std::size_t(c)] = 1;
                r.outer = tracer.trace(x, y, kTop);
            }
            for (std::uint8_t side : {kTop, kLeft, kRight, kBottom}) {
                if (tracer.visited(x, y, side) || !tracer.is_boundary(x, y, side)) continue;
                r.holes.push_back(tracer.trace(x, y, side));
            }
        }
    }
    assign_parents(ex.set);
    return ex;
}

} // namespace detail

inline RegionSet extract_regions(const LabelMap& map) { return detail::extract(map).set; }

/// Even-odd fill of every region's rings back into a label map.
inline LabelMap rasterize_regions(const RegionSet& set) {
    LabelMap out(set.width, set.height, kUnknown);
    std::vector<Ring> rings;
    for (const auto& r : set.regions) {
        rings.clear();
        rings.push_back(r.outer);
        rings.insert(rings.end(), r.holes.begin(), r.holes.end());
        rasterize_rings(rings, set.width, set.height, [&](int x, int y) { out(x, y) = r.label; });
    }
    return out;
}

/// Fills area_m2 on every region from its rings.
inline void compute_areas(RegionSet& set, const CameraMeta& camera) {
    for (auto& r : set.regions) r.area_m2 = rings_area_m2(r.outer, r.holes, set.width, set.height, camera);
}

// ---------------------------------------------------------------------------
// Size filtering

struct FilterResult {
    RegionSet regions;
    LabelMap labels;
    int passes = 0;
};

namespace detail {

inline bool has_removable(const RegionSet& set, double min_area_m2) {
    return std::any_of(set.regions.begin(), set.regions.end(),
                       [&](const Region& r) { return r.parent && *r.area_m2 < min_area_m2; });
}

/// Filter loop over an extraction whose component grid matches `labels`.
inline FilterResult filter_to_fixpoint(Extraction ex, LabelMap labels, double min_area_m2, const CameraMeta& camera) {
    FilterResult result;
    result.labels = std::move(labels);
    for (;;) {
        auto& regions = ex.set.regions;
        std::vector<int> removable;
        for (const auto& r : regions)
            if (r.parent && *r.area_m2 < min_area_m2) removable.push_back(r.id);
        if (removable.empty()) break;
        ++result.passes;
        std::sort(removable.begin(), removable.end(), [&](int a, int b) {
            const double aa = *regions[std::size_t(a)].area_m2, ab = *regions[std::size_t(b)].area_m2;
            return aa != ab ? aa < ab : a < b;
        });

        // A removed region takes its parent's final class; a parent removed in
        // the same pass hands its inherited class down.
        std::vector<char> removed(regions.size(), 0);
        for (int id : removable) removed[std::size_t(id)] = 1;
        std::vector<std::optional<ClassId>> final_label(regions.size());
        std::function<ClassId(int)> resolve = [&](int id) -> ClassId {
            auto& slot = final_label[std::size_t(id)];
            if (!slot) {
                const Region& r = regions[std::size_t(id)];
                slot = removed[std::size_t(id)] ? resolve(*r.parent) : r.label;
            }
            return *slot;
        };
        for (int id : removable) resolve(id);
        for (std::size_t p = 0; p < result.labels.size(); ++p) {
            const auto c = std::size_t(ex.component[p]);
            if (removed[c]) result.labels.data[p] = *final_label[c];
        }
        ex = extract(result.labels);
        compute_areas(ex.set, camera);
    }
    result.regions = std::move(ex.set);
    return result;
}

} // namespace detail

/// Removes non-root regions below min_area_m2 by relabeling them to their
/// parent's class, re-extracting until no removable region remains.
inline FilterResult filter_regions(const RegionSet& set, const LabelMap& map, double min_area_m2,
                                   const CameraMeta& camera) {
    if (!(min_area_m2 >= 0.0)) throw InvalidArgument("min_area must be >= 0");
    if (set.width != map.width || set.height != map.height)
        throw InvalidArgument("region set and label map dimensions differ");
    for (const auto& r : set.regions)
        if (!r.area_m2) throw InvalidArgument("region areas must be computed before filtering");
    if (!detail::has_removable(set, min_area_m2)) return {set, map, 0};

    auto ex = detail::extract(map);
    compute_areas(ex.set, camera);
    return detail::filter_to_fixpoint(std::move(ex), map, min_area_m2, camera);
}

// ---------------------------------------------------------------------------
// Dominant-point polygon approximation

struct RemovedVertex {
    std::size_t index; // in the input polygon
    std::size_t start; // dominant vertex the chord started from
    std::size_t end;   // chord end at removal time
    double distance;
};

struct Approximation {
    Ring polygon;
    std::vector<std::size_t> kept; // input indices, ascending
    std::vector<RemovedVertex> removed;
};

/// Dominant-point reduction of a closed polygon. Vertex 0 is always kept;
/// every other vertex is tested once, in order, against the chord from the
/// last dominant vertex to the vertex after it (indices wrap around). A
/// vertex within `thickness` of that chord is dropped and the chord end
/// advances; otherwise it becomes the new dominant start.
inline Approximation approximate_polygon_traced(const Ring& points, double thickness) {
    if (points.size() < 3) throw InvalidArgument("polygon approximation needs at least 3 vertices");
    if (!(thickness >= 0.0)) throw InvalidArgument("thickness must be >= 0");
    Approximation out;
    const std::size_t n = points.size();
    if (n == 3) {
        out.polygon = points;
        out.kept = {0, 1, 2};
        return out;
    }

    std::vector<char> dominant(n, 0);
    dominant[0] = 1;
    std::size_t start = 0;
    std::size_t pt = 1;
    while (pt < n) {
        const std::size_t end = (pt + 1) % n;
        const double dist = distance_to_line(points[pt], points[start], points[end]);
        if (dist <= thickness) {
            out.removed.push_back({pt, start, end, dist});
            ++pt;
        } else {
            dominant[pt] = 1;
            start = pt;
            ++pt;
        }
    }

    std::size_t kept = std::size_t(std::count(dominant.begin(), dominant.end(), 1));
    if (kept < 3) {
        // Restore a triangle: the vertex farthest from vertex 0, then the one
        // farthest from that chord.
        std::size_t far = 1;
        for (std::size_t i = 1; i < n; ++i)
            if (std::hypot(points[i].x - points[0].x, points[i].y - points[0].y) >
                std::hypot(points[far].x - points[0].x, points[far].y - points[0].y))
                far = i;
        dominant[far] = 1;
        if (std::count(dominant.begin(), dominant.end(), 1) < 3) {
            std::size_t third = 0;
            double best = -1.0;
            for (std::size_t i = 1; i < n; ++i) {
                if (dominant[i]) continue;
                const double d = distance_to_line(points[i], points[0], points[far]);
                if (d > best) {
                    best = d;
                    third = i;
                }
            }
            dominant[third] = 1;
        }
        std::erase_if(out.removed, [&](const RemovedVertex& r) { return dominant[r.index]; });
    }

    for (std::size_t i = 0; i < n; ++i)
        if (dominant[i]) {
            out.kept.push_back(i);
            out.polygon.push_back(points[i]);
        }
    return out;
}

inline Ring approximate_polygon(const Ring& points, double thickness) {
    return approximate_polygon_traced(points, thickness).polygon;
}

/// Applies the approximation to every outer and hole ring of the set.
inline void approximate_regions(RegionSet& set, double thickness) {
    parallel_for_blocks(set.regions.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            auto& r = set.regions[i];
            r.outer = approximate_polygon(r.outer, thickness);
            for (auto& h : r.holes) h = approximate_polygon(h, thickness);
        }
    });
}

// ---------------------------------------------------------------------------
// Full image-processing pipeline

struct StageTimings {
    double classification = 0.0;
    double edge_detection = 0.0;
    double contour_extraction = 0.0;
    double size_filtering = 0.0;
    double polygon_approximation = 0.0;

    double total() const {
        return classification + edge_detection + contour_extraction + size_filtering + polygon_approximation;
    }
};

struct Segmentation {
    RegionSet regions; // filtered, with approximated rings
    LabelMap labels;   // after size filtering
    EdgeImage edges;
    StageTimings timings;
};

inline Segmentation segment(const LabelMap& map, const CameraMeta& camera, double min_area_m2, double thickness_px) {
    camera.validate();
    if (!(min_area_m2 >= 0.0)) throw InvalidArgument("min_area must be >= 0");
    if (!(thickness_px >= 0.0)) throw InvalidArgument("thickness must be >= 0");
    using clock = std::chrono::steady_clock;
    auto seconds_since = [](clock::time_point t) { return std::chrono::duration<double>(clock::now() - t).count(); };

    Segmentation out;
    auto t = clock::now();
    out.edges = detect_edges(map);
    out.timings.edge_detection = seconds_since(t);

    t = clock::now();
    auto ex = detail::extract(map);
    out.timings.contour_extraction = seconds_since(t);

    t = clock::now();
    compute_areas(ex.set, camera);
    auto filtered = detail::filter_to_fixpoint(std::move(ex), map, min_area_m2, camera);
    out.timings.size_filtering = seconds_since(t);

    t = clock::now();
    approximate_regions(filtered.regions, thickness_px);
    out.timings.polygon_approximation = seconds_since(t);

    out.regions = std::move(filtered.regions);
    out.labels = std::move(filtered.labels);
    return out;
}

} // namespace hypermap
