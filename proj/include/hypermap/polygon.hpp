#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hypermap/error.hpp"

namespace hypermap {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Closed ring; the last vertex connects back to the first.
using Ring = std::vector<Point>;

/// Twice the signed shoelace area (positive when counter-clockwise in a y-up frame).
inline double signed_area2(const Ring& ring) {
    double acc = 0.0;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    return acc;
}

inline double signed_area(const Ring& ring) { return 0.5 * signed_area2(ring); }

/// Absolute shoelace area in the ring's own units (px² for pixel rings).
inline double polygon_area_px(const Ring& ring) {
    if (ring.size() < 3) throw InvalidArgument("polygon needs at least 3 vertices");
    return std::abs(signed_area(ring));
}

inline bool point_on_segment(Point p, Point a, Point b, double eps = 1e-12) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) > eps) return false;
    return p.x >= std::min(a.x, b.x) - eps && p.x <= std::max(a.x, b.x) + eps && p.y >= std::min(a.y, b.y) - eps &&
           p.y <= std::max(a.y, b.y) + eps;
}

inline bool point_on_boundary(Point p, const std::vector<Ring>& rings) {
    for (const auto& ring : rings)
        for (std::size_t i = 0; i < ring.size(); ++i)
            if (point_on_segment(p, ring[i], ring[(i + 1) % ring.size()])) return true;
    return false;
}

/// Even-odd containment over all rings together (outer + holes).
inline bool point_in_rings(Point p, const std::vector<Ring>& rings) {
    bool inside = false;
    for (const auto& ring : rings) {
        const std::size_t n = ring.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Point& a = ring[i];
            const Point& b = ring[j];
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x) inside = !inside;
            }
        }
    }
    return inside;
}

/// Even-odd scanline fill sampled at cell centers. Calls fill(col, row) for
/// every cell of a width×height grid whose center lies inside the rings.
template <class Fn>
void rasterize_rings(const std::vector<Ring>& rings, int width, int height, Fn&& fill) {
    double ymin = INFINITY, ymax = -INFINITY;
    for (const auto& ring : rings)
        for (const auto& p : ring) {
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    if (!(ymin <= ymax)) return;
    const int r0 = std::max(0, int(std::floor(ymin)));
    const int r1 = std::min(height - 1, int(std::ceil(ymax)));
    std::vector<double> xs;
    for (int r = r0; r <= r1; ++r) {
        const double yc = r + 0.5;
        xs.clear();
        for (const auto& ring : rings) {
            const std::size_t n = ring.size();
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const Point& a = ring[i];
                const Point& b = ring[j];
                if ((a.y > yc) != (b.y > yc)) xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // Cell c is filled when its center c+0.5 lies in (x0, x1].
            const int c0 = std::max(0, int(std::floor(xs[k] - 0.5)) + 1);
            const int c1 = std::min(width - 1, int(std::floor(xs[k + 1] - 0.5)));
            for (int c = c0; c <= c1; ++c) fill(c, r);
        }
    }
}

/// Perpendicular distance from p to the infinite line through a and b
/// (distance to a when a and b coincide).
inline double distance_to_line(Point p, Point a, Point b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    if (len == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
    return std::abs(dx * (p.y - a.y) - dy * (p.x - a.x)) / len;
}

} // namespace hypermap
