#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hypermap/error.hpp"

namespace hypermap {

using Rgb = std::array<std::uint8_t, 3>;

/// Dense row-major 2-D raster.
template <class T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(std::size_t(w) * std::size_t(h), fill) {
        if (w < 0 || h < 0) throw InvalidArgument("image dimensions must be non-negative");
    }

    std::size_t index(int x, int y) const { return std::size_t(y) * std::size_t(width) + std::size_t(x); }
    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    T& operator()(int x, int y) { return data[index(x, y)]; }
    const T& operator()(int x, int y) const { return data[index(x, y)]; }

    std::size_t size() const { return data.size(); }

    friend bool operator==(const Image&, const Image&) = default;
};

using RgbImage = Image<Rgb>;

} // namespace hypermap
