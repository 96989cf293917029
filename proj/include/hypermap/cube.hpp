#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hypermap/error.hpp"
#include "hypermap/image.hpp"

namespace hypermap {

/// Ground projection of the camera in the local world frame.
struct Pose {
    double x = 0.0;   // m
    double y = 0.0;   // m
    double yaw = 0.0; // rad
    friend bool operator==(const Pose&, const Pose&) = default;
};

struct CameraMeta {
    double height_m = 1.0;
    double fov_deg = 90.0; // full angle
    Pose pose;

    void validate() const {
        if (!(height_m > 0.0) || !std::isfinite(height_m)) throw InvalidArgument("camera height must be > 0");
        if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw InvalidArgument("camera fov must be in (0, 180) degrees");
    }
    friend bool operator==(const CameraMeta&, const CameraMeta&) = default;
};

struct Spectrum {
    std::vector<double> wavelengths_nm;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool is_zero() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
    }
    friend bool operator==(const Spectrum&, const Spectrum&) = default;
};

enum class SampleType : std::uint8_t { U8 = 0, U16 = 1, F32 = 2 };

inline double sample_max(SampleType t) {
    switch (t) {
    case SampleType::U8: return 255.0;
    case SampleType::U16: return 65535.0;
    case SampleType::F32: return 1.0;
    }
    return 1.0;
}

inline SampleType parse_sample_type(std::string_view s) {
    if (s == "u8") return SampleType::U8;
    if (s == "u16") return SampleType::U16;
    if (s == "f32") return SampleType::F32;
    throw InvalidArgument("unknown dtype '" + std::string(s) + "' (expected u8, u16 or f32)");
}

inline const char* to_string(SampleType t) {
    switch (t) {
    case SampleType::U8: return "u8";
    case SampleType::U16: return "u16";
    case SampleType::F32: return "f32";
    }
    return "?";
}

/// Quantizes a reflectance in [0,1] to an integer code with round-half-up.
template <class T>
T quantize(double reflectance) {
    constexpr double max = double(std::numeric_limits<T>::max());
    const double scaled = std::floor(std::clamp(reflectance, 0.0, 1.0) * max + 0.5);
    return T(std::min(scaled, max));
}

/// W×H×B reflectance cube, band-interleaved-by-pixel. Samples stay in their
/// storage type and are normalized to [0,1] on access.
class HyperCube {
public:
    using Storage = std::variant<std::vector<std::uint8_t>, std::vector<std::uint16_t>, std::vector<float>>;

    HyperCube() = default;

    HyperCube(int width, int height, std::vector<double> wavelengths_nm, Storage samples, CameraMeta camera = {})
        : width_(width), height_(height), wavelengths_(std::move(wavelengths_nm)), samples_(std::move(samples)),
          camera_(camera) {
        validate();
    }

    /// Zero-filled cube of the given storage type.
    static HyperCube zeros(int width, int height, std::vector<double> wavelengths_nm, SampleType type,
                           CameraMeta camera = {}) {
        const std::size_t n = std::size_t(std::max(width, 0)) * std::size_t(std::max(height, 0)) * wavelengths_nm.size();
        Storage s;
        switch (type) {
        case SampleType::U8: s = std::vector<std::uint8_t>(n); break;
        case SampleType::U16: s = std::vector<std::uint16_t>(n); break;
        case SampleType::F32: s = std::vector<float>(n); break;
        }
        return HyperCube(width, height, std::move(wavelengths_nm), std::move(s), camera);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int bands() const { return int(wavelengths_.size()); }
    std::size_t pixel_count() const { return std::size_t(width_) * std::size_t(height_); }
    const std::vector<double>& wavelengths() const { return wavelengths_; }
    const CameraMeta& camera() const { return camera_; }
    void set_camera(const CameraMeta& c) {
        c.validate();
        camera_ = c;
    }

    SampleType sample_type() const { return SampleType(samples_.index()); }
    const Storage& samples() const { return samples_; }
    Storage& samples() { return samples_; }

    std::size_t sample_count() const {
        return std::visit([](const auto& v) { return v.size(); }, samples_);
    }

    /// Normalized reflectance of flat sample index i.
    double value(std::size_t i) const {
        return std::visit(
            [&](const auto& v) -> double {
                using T = typename std::decay_t<decltype(v)>::value_type;
                if constexpr (std::is_same_v<T, float>)
                    return double(v[i]);
                else
                    return double(v[i]) / double(std::numeric_limits<T>::max());
            },
            samples_);
    }

    double value(int x, int y, int band) const {
        return value((std::size_t(y) * std::size_t(width_) + std::size_t(x)) * std::size_t(bands()) + std::size_t(band));
    }

    /// Stores a reflectance, quantizing for integer storage.
    void set_value(std::size_t i, double reflectance) {
        std::visit(
            [&](auto& v) {
                using T = typename std::decay_t<decltype(v)>::value_type;
                if constexpr (std::is_same_v<T, float>)
                    v[i] = float(reflectance);
                else
                    v[i] = quantize<T>(reflectance);
            },
            samples_);
    }

    void validate() const {
        if (width_ <= 0 || height_ <= 0) throw InvalidArgument("cube dimensions must be positive");
        if (wavelengths_.empty()) throw InvalidArgument("cube needs at least one band");
        for (std::size_t i = 1; i < wavelengths_.size(); ++i)
            if (!(wavelengths_[i] > wavelengths_[i - 1]))
                throw WavelengthOrderError("wavelengths must be strictly increasing");
        if (sample_count() != pixel_count() * wavelengths_.size())
            throw InvalidArgument("cube payload size does not match width*height*bands");
        if (sample_type() == SampleType::F32) {
            const auto& v = std::get<std::vector<float>>(samples_);
            for (float f : v)
                if (!(f >= 0.0f && f <= 1.0f)) throw InvalidArgument("reflectance outside [0,1]");
        }
        camera_.validate();
    }

    friend bool operator==(const HyperCube&, const HyperCube&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> wavelengths_;
    Storage samples_;
    CameraMeta camera_;
};

inline Spectrum pixel_spectrum(const HyperCube& cube, int x, int y) {
    if (x < 0 || y < 0 || x >= cube.width() || y >= cube.height())
        throw InvalidArgument("pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside the cube");
    Spectrum s;
    s.wavelengths_nm = cube.wavelengths();
    s.values.resize(std::size_t(cube.bands()));
    const std::size_t base = (std::size_t(y) * std::size_t(cube.width()) + std::size_t(x)) * std::size_t(cube.bands());
    for (int b = 0; b < cube.bands(); ++b) s.values[std::size_t(b)] = cube.value(base + std::size_t(b));
    return s;
}

/// Index of the band whose wavelength is nearest to target; ties go to the lower band.
inline int nearest_band(const std::vector<double>& wavelengths, double target_nm) {
    int best = 0;
    double best_d = std::abs(wavelengths.at(0) - target_nm);
    for (int i = 1; i < int(wavelengths.size()); ++i) {
        const double d = std::abs(wavelengths[std::size_t(i)] - target_nm);
        if (d < best_d) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

inline constexpr std::array<double, 3> kFalseRgbTargetsNm{640.0, 540.0, 470.0}; // r, g, b

/// Band indices used for the red, green and blue channels.
inline std::array<int, 3> false_rgb_bands(const HyperCube& cube) {
    return {nearest_band(cube.wavelengths(), kFalseRgbTargetsNm[0]),
            nearest_band(cube.wavelengths(), kFalseRgbTargetsNm[1]),
            nearest_band(cube.wavelengths(), kFalseRgbTargetsNm[2])};
}

/// Three-band rendering, each channel min-max stretched independently.
inline RgbImage false_rgb(const HyperCube& cube) {
    if (cube.bands() < 3) throw InvalidArgument("false RGB needs at least 3 bands");
    const auto bands = false_rgb_bands(cube);
    RgbImage out(cube.width(), cube.height());
    const std::size_t n = cube.pixel_count();
    const std::size_t nb = std::size_t(cube.bands());
    for (int c = 0; c < 3; ++c) {
        const std::size_t band = std::size_t(bands[std::size_t(c)]);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t p = 0; p < n; ++p) {
            const double v = cube.value(p * nb + band);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double range = hi - lo;
        for (std::size_t p = 0; p < n; ++p) {
            std::uint8_t code = 0;
            if (range > 0.0) {
                const double t = (cube.value(p * nb + band) - lo) / range;
                code = std::uint8_t(std::clamp(std::floor(t * 255.0 + 0.5), 0.0, 255.0));
            }
            out.data[p][std::size_t(c)] = code;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// HSC on-disk format (little-endian):
//   "HSCUBE1\n" u32 width u32 height u32 bands u8 dtype f32 wavelengths[bands]
//   f32 h_m f32 fov_deg f64 pose_x f64 pose_y f64 pose_yaw, then the payload.

inline constexpr std::string_view kHscMagic{"HSCUBE1\n", 8};

namespace detail {

static_assert(std::endian::native == std::endian::little, "HSC I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& v) {
    return bool(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

template <class Src, class Dst>
std::vector<Dst> requantize(const std::vector<Src>& src) {
    std::vector<Dst> dst(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        double r;
        if constexpr (std::is_same_v<Src, float>)
            r = double(src[i]);
        else
            r = double(src[i]) / double(std::numeric_limits<Src>::max());
        if constexpr (std::is_same_v<Dst, float>)
            dst[i] = float(r);
        else
            dst[i] = quantize<Dst>(r);
    }
    return dst;
}

} // namespace detail

/// Converts the cube's storage type. Same-type conversion is a copy.
inline HyperCube convert(const HyperCube& cube, SampleType target) {
    if (cube.sample_type() == target) return cube;
    HyperCube::Storage out = std::visit(
        [&](const auto& v) -> HyperCube::Storage {
            using Src = typename std::decay_t<decltype(v)>::value_type;
            switch (target) {
            case SampleType::U8: return detail::requantize<Src, std::uint8_t>(v);
            case SampleType::U16: return detail::requantize<Src, std::uint16_t>(v);
            case SampleType::F32: return detail::requantize<Src, float>(v);
            }
            return {};
        },
        cube.samples());
    return HyperCube(cube.width(), cube.height(), cube.wavelengths(), std::move(out), cube.camera());
}

inline void save_cube(const HyperCube& cube, const std::filesystem::path& path, SampleType dtype) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    const HyperCube stored = convert(cube, dtype);

    out.write(kHscMagic.data(), std::streamsize(kHscMagic.size()));
    detail::put<std::uint32_t>(out, std::uint32_t(stored.width()));
    detail::put<std::uint32_t>(out, std::uint32_t(stored.height()));
    detail::put<std::uint32_t>(out, std::uint32_t(stored.bands()));
    detail::put<std::uint8_t>(out, std::uint8_t(dtype));
    for (double w : stored.wavelengths()) detail::put<float>(out, float(w));
    const CameraMeta& cam = stored.camera();
    detail::put<float>(out, float(cam.height_m));
    detail::put<float>(out, float(cam.fov_deg));
    detail::put<double>(out, cam.pose.x);
    detail::put<double>(out, cam.pose.y);
    detail::put<double>(out, cam.pose.yaw);
    std::visit(
        [&](const auto& v) {
            out.write(reinterpret_cast<const char*>(v.data()),
                      std::streamsize(v.size() * sizeof(typename std::decay_t<decltype(v)>::value_type)));
        },
        stored.samples());
    if (!out) throw IoError("write failed: " + path.string());
}

/// Reads an HSC file. Header values are stored as f32, so wavelengths and
/// camera height/fov come back at f32 precision.
inline HyperCube load_cube(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    char magic[8];
    if (!in.read(magic, 8) || std::string_view(magic, 8) != kHscMagic) throw HeaderError("not an HSC cube (bad magic)");
    std::uint32_t w = 0, h = 0, b = 0;
    std::uint8_t code = 0;
    if (!detail::get(in, w) || !detail::get(in, h) || !detail::get(in, b) || !detail::get(in, code))
        throw HeaderError("truncated HSC header");
    if (w == 0 || h == 0 || b == 0) throw HeaderError("HSC header has a zero dimension");
    if (code > 2) throw HeaderError("unknown HSC dtype code " + std::to_string(code));
    const std::uint64_t count = std::uint64_t(w) * h * b;
    if (count > (std::uint64_t(1) << 34)) throw HeaderError("HSC header dimensions are implausibly large");

    std::vector<double> wavelengths(b);
    for (auto& wl : wavelengths) {
        float f;
        if (!detail::get(in, f)) throw HeaderError("truncated HSC header (wavelengths)");
        wl = f;
    }
    float hm = 0, fov = 0;
    CameraMeta cam;
    if (!detail::get(in, hm) || !detail::get(in, fov) || !detail::get(in, cam.pose.x) || !detail::get(in, cam.pose.y) ||
        !detail::get(in, cam.pose.yaw))
        throw HeaderError("truncated HSC header (camera)");
    cam.height_m = hm;
    cam.fov_deg = fov;
    try {
        cam.validate();
    } catch (const InvalidArgument& e) {
        throw HeaderError(std::string("HSC header: ") + e.what());
    }
    for (std::size_t i = 1; i < wavelengths.size(); ++i)
        if (!(wavelengths[i] > wavelengths[i - 1])) throw WavelengthOrderError("HSC wavelengths are not strictly increasing");

    auto read_payload = [&](auto tag) -> HyperCube::Storage {
        using T = decltype(tag);
        std::vector<T> v(count);
        in.read(reinterpret_cast<char*>(v.data()), std::streamsize(count * sizeof(T)));
        if (std::uint64_t(in.gcount()) != count * sizeof(T)) throw TruncatedError("HSC payload is truncated");
        if constexpr (std::is_same_v<T, float>)
            for (float f : v)
                if (!(f >= 0.0f && f <= 1.0f)) throw HeaderError("HSC f32 payload has values outside [0,1]");
        return v;
    };
    HyperCube::Storage storage;
    switch (SampleType(code)) {
    case SampleType::U8: storage = read_payload(std::uint8_t{}); break;
    case SampleType::U16: storage = read_payload(std::uint16_t{}); break;
    case SampleType::F32: storage = read_payload(float{}); break;
    }
    return HyperCube(int(w), int(h), std::move(wavelengths), std::move(storage), cam);
}

} // namespace hypermap
