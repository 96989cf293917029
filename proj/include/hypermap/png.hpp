#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hypermap/error.hpp"
#include "hypermap/image.hpp"

namespace hypermap::png {

namespace detail {

struct WriteBuffer {
    std::vector<std::uint8_t> bytes;
};

inline void write_callback(png_structp png_ptr, png_bytep data, png_size_t length) {
    auto* buf = static_cast<WriteBuffer*>(png_get_io_ptr(png_ptr));
    buf->bytes.insert(buf->bytes.end(), data, data + length);
}

inline void flush_callback(png_structp) {}

inline void error_callback(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
inline void warning_callback(png_structp, png_const_charp) {}

// Rows must already be packed in PNG byte order (big-endian for 16-bit).
inline std::vector<std::uint8_t> encode(int width, int height, int bit_depth, int color_type,
                                        const std::vector<std::vector<std::uint8_t>>& rows) {
    if (width <= 0 || height <= 0) throw InvalidArgument("png: empty image");
    png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
    if (!png_ptr) throw IoError("png: cannot allocate write struct");
    png_infop info_ptr = png_create_info_struct(png_ptr);
    WriteBuffer buf;
    try {
        if (!info_ptr) throw IoError("png: cannot allocate info struct");
        png_set_write_fn(png_ptr, &buf, write_callback, flush_callback);
        png_set_IHDR(png_ptr, info_ptr, png_uint_32(width), png_uint_32(height), bit_depth, color_type,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png_ptr, 3);
        png_write_info(png_ptr, info_ptr);
        for (const auto& row : rows) png_write_row(png_ptr, row.data());
        png_write_end(png_ptr, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png_ptr, &info_ptr);
        throw;
    }
    png_destroy_write_struct(&png_ptr, &info_ptr);
    return std::move(buf.bytes);
}

struct ReadCursor {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

inline void read_callback(png_structp png_ptr, png_bytep out, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png_ptr));
    if (cur->pos + length > cur->size) png_error(png_ptr, "truncated png");
    std::memcpy(out, cur->data + cur->pos, length);
    cur->pos += length;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_rgb(const RgbImage& img) {
    std::vector<std::vector<std::uint8_t>> rows(std::size_t(img.height));
    for (int y = 0; y < img.height; ++y) {
        auto& row = rows[std::size_t(y)];
        row.resize(std::size_t(img.width) * 3);
        for (int x = 0; x < img.width; ++x) {
            const Rgb& px = img(x, y);
            std::memcpy(&row[std::size_t(x) * 3], px.data(), 3);
        }
    }
    return detail::encode(img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

inline std::vector<std::uint8_t> encode_gray16(const Image<std::uint16_t>& img) {
    std::vector<std::vector<std::uint8_t>> rows(std::size_t(img.height));
    for (int y = 0; y < img.height; ++y) {
        auto& row = rows[std::size_t(y)];
        row.resize(std::size_t(img.width) * 2);
        for (int x = 0; x < img.width; ++x) {
            const std::uint16_t v = img(x, y);
            row[std::size_t(x) * 2] = std::uint8_t(v >> 8);
            row[std::size_t(x) * 2 + 1] = std::uint8_t(v & 0xff);
        }
    }
    return detail::encode(img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

/// 1-bit grayscale; nonzero pixels are white.
inline std::vector<std::uint8_t> encode_mask(const Image<std::uint8_t>& img) {
    std::vector<std::vector<std::uint8_t>> rows(std::size_t(img.height));
    for (int y = 0; y < img.height; ++y) {
        auto& row = rows[std::size_t(y)];
        row.assign((std::size_t(img.width) + 7) / 8, 0);
        for (int x = 0; x < img.width; ++x)
            if (img(x, y)) row[std::size_t(x) / 8] |= std::uint8_t(0x80 >> (x % 8));
    }
    return detail::encode(img.width, img.height, 1, PNG_COLOR_TYPE_GRAY, rows);
}

inline Image<std::uint16_t> decode_gray16(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("png: bad signature");
    png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::error_callback,
                                                 detail::warning_callback);
    if (!png_ptr) throw IoError("png: cannot allocate read struct");
    png_infop info_ptr = png_create_info_struct(png_ptr);
    detail::ReadCursor cursor{bytes.data(), bytes.size(), 0};
    Image<std::uint16_t> out;
    try {
        if (!info_ptr) throw IoError("png: cannot allocate info struct");
        png_set_read_fn(png_ptr, &cursor, detail::read_callback);
        png_read_info(png_ptr, info_ptr);
        const int bit_depth = png_get_bit_depth(png_ptr, info_ptr);
        const int color_type = png_get_color_type(png_ptr, info_ptr);
        if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY)
            throw IoError("png: expected 16-bit grayscale label image");
        const int w = int(png_get_image_width(png_ptr, info_ptr));
        const int h = int(png_get_image_height(png_ptr, info_ptr));
        out = Image<std::uint16_t>(w, h);
        std::vector<std::uint8_t> row(std::size_t(w) * 2);
        for (int y = 0; y < h; ++y) {
            png_read_row(png_ptr, row.data(), nullptr);
            for (int x = 0; x < w; ++x)
                out(x, y) = std::uint16_t((row[std::size_t(x) * 2] << 8) | row[std::size_t(x) * 2 + 1]);
        }
        png_read_end(png_ptr, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
        throw;
    }
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace hypermap::png
