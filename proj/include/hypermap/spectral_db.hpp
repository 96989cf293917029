#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hypermap/cube.hpp"
#include "hypermap/error.hpp"
#include "hypermap/image.hpp"

namespace hypermap {

using ClassId = std::uint16_t;
inline constexpr ClassId kUnknown = 0;
inline constexpr std::string_view kTaxonomyRoot = "World";

enum class SimilarityAlgorithm { SAM, Euclidean };

inline SimilarityAlgorithm parse_algorithm(std::string_view s) {
    if (s == "sam" || s == "SAM") return SimilarityAlgorithm::SAM;
    if (s == "euclidean" || s == "Euclidean") return SimilarityAlgorithm::Euclidean;
    throw InvalidArgument("unknown similarity algorithm '" + std::string(s) + "' (expected sam or euclidean)");
}

inline const char* to_string(SimilarityAlgorithm a) { return a == SimilarityAlgorithm::SAM ? "sam" : "euclidean"; }

/// Spectral angle in degrees between two equal-length non-zero vectors.
///
/// Uses 2·atan2(|â−b̂|, |â+b̂|), which equals arccos(â·b̂) but keeps full
/// precision for nearly parallel spectra where arccos is ill-conditioned.
inline double spectral_angle_deg(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("spectrum length mismatch");
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) throw InvalidArgument("zero spectrum has no spectral angle");
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    double diff = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double u = a[i] / na;
        const double v = b[i] / nb;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum)) * 180.0 / std::numbers::pi;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("spectrum length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

/// Dissimilarity score: 0 for identical spectra, larger is less similar.
inline double similarity(const Spectrum& a, const Spectrum& b, SimilarityAlgorithm algo) {
    if (a.size() != b.size()) throw InvalidArgument("spectrum length mismatch");
    if (algo == SimilarityAlgorithm::SAM) return spectral_angle_deg(a.values, b.values);
    return euclidean_distance(a.values, b.values);
}

/// Taxonomy path for well-known class names; World/<name> otherwise.
inline std::vector<std::string> default_taxonomy_path(std::string_view name) {
    static const std::vector<std::vector<std::string>> known = {
        {"World", "Landscape", "Ground"}, {"World", "Landscape", "Concrete"}, {"World", "Landscape", "Water"},
        {"World", "Vegetation"},          {"World", "Obstacle", "Wood"},     {"World", "Obstacle", "Tarp"},
    };
    for (const auto& path : known)
        if (path.back() == name) return path;
    return {std::string(kTaxonomyRoot), std::string(name)};
}

struct SemanticClass {
    ClassId id = 0;
    std::string name;
    Rgb color{0, 0, 0};
    Spectrum reference;
    std::vector<std::string> taxonomy;

    friend bool operator==(const SemanticClass&, const SemanticClass&) = default;
};

/// Run-time reference database. Ids grow monotonically and are never reused.
class SpectralDatabase {
public:
    const std::vector<SemanticClass>& classes() const { return classes_; }
    bool empty() const { return classes_.empty(); }
    std::size_t size() const { return classes_.size(); }
    ClassId next_id() const { return next_id_; }

    /// Band count shared by all references, or nullopt when empty.
    std::optional<std::size_t> band_count() const {
        if (classes_.empty()) return std::nullopt;
        return classes_.front().reference.size();
    }

    ClassId add_class(std::string name, Rgb color, Spectrum reference, std::vector<std::string> taxonomy = {}) {
        if (name.empty()) throw InvalidArgument("class name must not be empty");
        if (find(name)) throw InvalidArgument("duplicate class name '" + name + "'");
        if (reference.values.empty() || reference.is_zero()) throw InvalidArgument("reference spectrum is zero");
        if (!reference.wavelengths_nm.empty() && reference.wavelengths_nm.size() != reference.values.size())
            throw InvalidArgument("reference wavelengths and values differ in length");
        if (auto bands = band_count(); bands && *bands != reference.size())
            throw InvalidArgument("reference band count " + std::to_string(reference.size()) +
                                  " does not match database band count " + std::to_string(*bands));
        if (next_id_ == 0xffff) throw InvalidArgument("class id space exhausted");
        if (taxonomy.empty()) taxonomy = default_taxonomy_path(name);
        validate_taxonomy(taxonomy, name);

        SemanticClass c{next_id_++, std::move(name), color, std::move(reference), std::move(taxonomy)};
        classes_.push_back(std::move(c));
        return classes_.back().id;
    }

    void remove_class(ClassId id) {
        auto it = std::find_if(classes_.begin(), classes_.end(), [&](const auto& c) { return c.id == id; });
        if (it == classes_.end()) throw NotFound("unknown class id " + std::to_string(id));
        classes_.erase(it);
    }

    const SemanticClass* find(ClassId id) const {
        for (const auto& c : classes_)
            if (c.id == id) return &c;
        return nullptr;
    }

    const SemanticClass* find(std::string_view name) const {
        for (const auto& c : classes_)
            if (c.name == name) return &c;
        return nullptr;
    }

    /// Restores a class with a fixed id (used by the loader).
    void insert_loaded(SemanticClass c) {
        if (c.id == 0) throw InvalidArgument("class id 0 is reserved for Unknown");
        if (!classes_.empty() && c.id <= classes_.back().id) throw InvalidArgument("class ids must be strictly increasing");
        if (find(c.name)) throw InvalidArgument("duplicate class name '" + c.name + "'");
        if (c.reference.values.empty() || c.reference.is_zero()) throw InvalidArgument("reference spectrum is zero");
        if (auto bands = band_count(); bands && *bands != c.reference.size())
            throw InvalidArgument("reference band count mismatch for class '" + c.name + "'");
        validate_taxonomy(c.taxonomy, c.name);
        next_id_ = std::max<ClassId>(next_id_, ClassId(c.id + 1));
        classes_.push_back(std::move(c));
    }

    void set_next_id(ClassId id) {
        if (!classes_.empty() && id <= classes_.back().id) throw InvalidArgument("next_id must exceed every class id");
        if (id == 0) throw InvalidArgument("next_id must be >= 1");
        next_id_ = id;
    }

    friend bool operator==(const SpectralDatabase&, const SpectralDatabase&) = default;

private:
    static void validate_taxonomy(const std::vector<std::string>& path, const std::string& name) {
        if (path.empty() || path.front() != kTaxonomyRoot)
            throw InvalidArgument("taxonomy of '" + name + "' must be rooted at World");
        for (const auto& node : path)
            if (node.empty() || node.find('/') != std::string::npos)
                throw InvalidArgument("taxonomy of '" + name + "' has an invalid node name");
    }

    std::vector<SemanticClass> classes_;
    ClassId next_id_ = 1;
};

inline nlohmann::json to_json(const SpectralDatabase& db) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : db.classes()) {
        std::vector<float> wl(c.reference.wavelengths_nm.begin(), c.reference.wavelengths_nm.end());
        std::vector<float> vals(c.reference.values.begin(), c.reference.values.end());
        classes.push_back({{"id", c.id},
                           {"name", c.name},
                           {"color", {c.color[0], c.color[1], c.color[2]}},
                           {"taxonomy", c.taxonomy},
                           {"wavelengths_nm", wl},
                           {"values", vals}});
    }
    return {{"classes", classes}, {"next_id", db.next_id()}};
}

inline SpectralDatabase database_from_json(const nlohmann::json& doc) {
    try {
        SpectralDatabase db;
        if (!doc.is_object() || !doc.contains("classes") || !doc.at("classes").is_array())
            throw InvalidArgument("database document needs a 'classes' array");
        for (const auto& jc : doc.at("classes")) {
            SemanticClass c;
            const auto id = jc.at("id").get<long>();
            if (id <= 0 || id > 0xfffe) throw InvalidArgument("class id out of range");
            c.id = ClassId(id);
            c.name = jc.at("name").get<std::string>();
            const auto color = jc.at("color").get<std::vector<int>>();
            if (color.size() != 3) throw InvalidArgument("class color must be [r,g,b]");
            for (int k = 0; k < 3; ++k) {
                if (color[std::size_t(k)] < 0 || color[std::size_t(k)] > 255) throw InvalidArgument("color out of range");
                c.color[std::size_t(k)] = std::uint8_t(color[std::size_t(k)]);
            }
            c.taxonomy = jc.value("taxonomy", default_taxonomy_path(c.name));
            for (float f : jc.value("wavelengths_nm", std::vector<float>{})) c.reference.wavelengths_nm.push_back(f);
            for (float f : jc.at("values").get<std::vector<float>>()) c.reference.values.push_back(f);
            if (!c.reference.wavelengths_nm.empty() && c.reference.wavelengths_nm.size() != c.reference.values.size())
                throw InvalidArgument("class '" + c.name + "': wavelengths and values differ in length");
            db.insert_loaded(std::move(c));
        }
        if (doc.contains("next_id")) db.set_next_id(ClassId(doc.at("next_id").get<int>()));
        return db;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed database document: ") + e.what());
    }
}

inline void save_db(const SpectralDatabase& db, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << to_json(db).dump(2) << '\n';
}

inline SpectralDatabase load_db(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed database JSON: ") + e.what());
    }
    return database_from_json(doc);
}

} // namespace hypermap
