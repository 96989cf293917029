#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "hypermap/cube.hpp"
#include "hypermap/error.hpp"
#include "hypermap/image.hpp"
#include "hypermap/parallel.hpp"
#include "hypermap/spectral_db.hpp"

namespace hypermap {

/// Per-pixel class ids, row-major; 0 is Unknown.
using LabelMap = Image<ClassId>;

struct ClassifyParams {
    SimilarityAlgorithm algorithm = SimilarityAlgorithm::SAM;
    double variance = 20.0; // score units: degrees for SAM

    void validate() const {
        if (!(variance >= 0.0) || !std::isfinite(variance)) throw InvalidArgument("variance must be >= 0");
    }
    friend bool operator==(const ClassifyParams&, const ClassifyParams&) = default;
};

struct Classification {
    LabelMap labels;
    std::map<ClassId, std::size_t> counts; // every class in the snapshot, zero included
    std::size_t unknown_count = 0;
    double seconds = 0.0;
};

namespace detail {

struct PreparedReferences {
    std::size_t bands = 0;
    std::vector<ClassId> ids;
    std::vector<double> raw;  // K×B
    std::vector<double> unit; // K×B, L2-normalized
};

inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

inline PreparedReferences prepare(const SpectralDatabase& db) {
    PreparedReferences p;
    p.bands = *db.band_count();
    for (const auto& c : db.classes()) {
        p.ids.push_back(c.id);
        // Same reduction as the pixel norm, so a pixel equal to a reference normalizes identically.
        const double* v0 = c.reference.values.data();
        const double n = std::sqrt(dot(v0, v0, p.bands));
        for (double v : c.reference.values) {
            p.raw.push_back(v);
            p.unit.push_back(v / n);
        }
    }
    return p;
}

template <class T>
struct SampleDecoder {
    // Same arithmetic as HyperCube::value so decoded pixels match pixel_spectrum bit-for-bit.
    std::array<double, 256> lut{};
    SampleDecoder() {
        if constexpr (std::is_same_v<T, std::uint8_t>)
            for (int i = 0; i < 256; ++i) lut[std::size_t(i)] = double(i) / 255.0;
    }
    void decode(const T* src, double* dst, std::size_t n) const {
        if constexpr (std::is_same_v<T, std::uint8_t>) {
            for (std::size_t i = 0; i < n; ++i) dst[i] = lut[src[i]];
        } else if constexpr (std::is_same_v<T, std::uint16_t>) {
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) dst[i] = double(src[i]) / 65535.0;
        } else {
#pragma omp simd
            for (std::size_t i = 0; i < n; ++i) dst[i] = double(src[i]);
        }
    }
};

/// Exact SAM angle between pixel x (norm `norm`) and unit reference r.
inline double angle_to_unit(const double* x, double norm, const double* r, std::size_t n) {
    double diff = 0.0, sum = 0.0;
#pragma omp simd reduction(+ : diff, sum)
    for (std::size_t i = 0; i < n; ++i) {
        const double u = x[i] / norm;
        diff += (u - r[i]) * (u - r[i]);
        sum += (u + r[i]) * (u + r[i]);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum)) * 180.0 / std::numbers::pi;
}

template <class T>
void classify_rows(const std::vector<T>& samples, std::size_t width, std::size_t row_begin, std::size_t row_end,
                   const PreparedReferences& refs, const ClassifyParams& params, ClassId* out) {
    const std::size_t nb = refs.bands;
    const std::size_t nk = refs.ids.size();
    SampleDecoder<T> decoder;
    std::vector<double> x(nb);
    for (std::size_t p = row_begin * width; p < row_end * width; ++p) {
        decoder.decode(samples.data() + p * nb, x.data(), nb);
        ClassId label = kUnknown;
        if (params.algorithm == SimilarityAlgorithm::SAM) {
            const double n2 = dot(x.data(), x.data(), nb);
            if (n2 > 0.0) {
                std::size_t best = 0;
                double best_dot = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < nk; ++k) {
                    const double d = dot(x.data(), refs.unit.data() + k * nb, nb);
                    if (d > best_dot) {
                        best_dot = d;
                        best = k;
                    }
                }
                const double angle = angle_to_unit(x.data(), std::sqrt(n2), refs.unit.data() + best * nb, nb);
                if (angle <= params.variance) label = refs.ids[best];
            }
        } else {
            std::size_t best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < nk; ++k) {
                const double* r = refs.raw.data() + k * nb;
                double d2 = 0.0;
#pragma omp simd reduction(+ : d2)
                for (std::size_t i = 0; i < nb; ++i) d2 += (x[i] - r[i]) * (x[i] - r[i]);
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = k;
                }
            }
            if (std::sqrt(best_d2) <= params.variance) label = refs.ids[best];
        }
        out[p] = label;
    }
}

} // namespace detail

/// Labels every pixel with its most similar class, or Unknown when the best
/// score exceeds the variance threshold. Ties go to the smallest class id.
inline Classification classify(const HyperCube& cube, const SpectralDatabase& db, const ClassifyParams& params) {
    params.validate();
    if (db.empty()) throw InvalidArgument("empty spectral database");
    if (*db.band_count() != std::size_t(cube.bands()))
        throw InvalidArgument("cube has " + std::to_string(cube.bands()) + " bands but the database references have " +
                              std::to_string(*db.band_count()));

    const auto t0 = std::chrono::steady_clock::now();
    const auto refs = detail::prepare(db);
    Classification result;
    result.labels = LabelMap(cube.width(), cube.height());
    ClassId* out = result.labels.data.data();
    const std::size_t width = std::size_t(cube.width());
    std::visit(
        [&](const auto& samples) {
            parallel_for_blocks(std::size_t(cube.height()), [&](std::size_t r0, std::size_t r1) {
                detail::classify_rows(samples, width, r0, r1, refs, params, out);
            });
        },
        cube.samples());
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (ClassId id : refs.ids) result.counts[id] = 0;
    for (ClassId l : result.labels.data) {
        if (l == kUnknown)
            ++result.unknown_count;
        else
            ++result.counts[l];
    }
    return result;
}

/// Display rendering: class colors, Unknown black.
inline RgbImage render_labels(const LabelMap& labels, const SpectralDatabase& db) {
    std::map<ClassId, Rgb> palette;
    for (const auto& c : db.classes()) palette[c.id] = c.color;
    RgbImage img(labels.width, labels.height, Rgb{0, 0, 0});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = palette.find(labels.data[i]);
        if (it != palette.end()) img.data[i] = it->second;
    }
    return img;
}

/// Sidecar mapping label id to name and color.
inline nlohmann::json label_sidecar(const SpectralDatabase& db) {
    nlohmann::json classes = nlohmann::json::object();
    classes["0"] = {{"name", "Unknown"}, {"color", {0, 0, 0}}};
    for (const auto& c : db.classes())
        classes[std::to_string(c.id)] = {{"name", c.name}, {"color", {c.color[0], c.color[1], c.color[2]}}};
    return {{"classes", classes}};
}

} // namespace hypermap
