#pragma once

#include <cmath>
#include <numbers>

#include "hypermap/cube.hpp"
#include "hypermap/polygon.hpp"

namespace hypermap {

/// Local metric frame, meters.
using WorldPoint = Point;

struct Footprint {
    double side_m = 0.0;
    double area_m2 = 0.0;
};

/// tan of an angle in degrees. 45° is returned as exactly 1; std::tan(pi/4)
/// rounds to 0.9999999999999999.
inline double tan_deg(double deg) {
    if (deg == 45.0) return 1.0;
    return std::tan(deg * std::numbers::pi / 180.0);
}

/// Square ground footprint of a nadir camera: side = 2·h·tan(fov/2), area = side².
inline Footprint image_footprint(double height_m, double fov_deg) {
    CameraMeta{height_m, fov_deg, {}}.validate();
    const double side = 2.0 * height_m * tan_deg(fov_deg / 2.0);
    return {side, side * side};
}

inline Footprint image_footprint(const CameraMeta& cam) { return image_footprint(cam.height_m, cam.fov_deg); }

/// Pixel (col,row) to world meters. The image center maps to the camera pose;
/// +col is +x and +row is −y before rotating by yaw.
class PixelToWorld {
public:
    PixelToWorld(int width, int height, const CameraMeta& cam) : width_(width), height_(height), pose_(cam.pose) {
        if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
        const double side = image_footprint(cam).side_m;
        sx_ = side / width;
        sy_ = side / height;
        c_ = std::cos(cam.pose.yaw);
        s_ = std::sin(cam.pose.yaw);
    }

    WorldPoint operator()(Point px) const {
        const double lx = (px.x - 0.5 * width_) * sx_;
        const double ly = -(px.y - 0.5 * height_) * sy_;
        return {pose_.x + c_ * lx - s_ * ly, pose_.y + s_ * lx + c_ * ly};
    }

    Point inverse(WorldPoint w) const {
        const double dx = w.x - pose_.x;
        const double dy = w.y - pose_.y;
        const double lx = c_ * dx + s_ * dy;
        const double ly = -s_ * dx + c_ * dy;
        return {lx / sx_ + 0.5 * width_, -ly / sy_ + 0.5 * height_};
    }

    double meters_per_px_x() const { return sx_; }
    double meters_per_px_y() const { return sy_; }
    double pixel_area_m2() const { return sx_ * sy_; }

private:
    int width_, height_;
    Pose pose_;
    double sx_ = 0, sy_ = 0, c_ = 1, s_ = 0;
};

inline WorldPoint pixel_to_world(Point px, int width, int height, const CameraMeta& cam) {
    return PixelToWorld(width, height, cam)(px);
}

/// Ground area of one pixel: footprint area / (W·H).
inline double pixel_area_m2(int width, int height, const CameraMeta& cam) {
    if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
    return image_footprint(cam).area_m2 / (double(width) * double(height));
}

/// Area of outer minus holes, in m².
inline double rings_area_m2(const Ring& outer, const std::vector<Ring>& holes, int width, int height,
                            const CameraMeta& cam) {
    double px2 = polygon_area_px(outer);
    for (const auto& h : holes) px2 -= polygon_area_px(h);
    return px2 * pixel_area_m2(width, height, cam);
}

} // namespace hypermap
