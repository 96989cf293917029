#pragma once

// HTTP/JSON facade over the pipeline. Session holds the state and does the
// work; Service only maps routes onto Session calls.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <tuple>

#include <httplib.h>
#include <json.hpp>

#include "hypermap/classifier.hpp"
#include "hypermap/cube.hpp"
#include "hypermap/geojson.hpp"
#include "hypermap/png.hpp"
#include "hypermap/segmentation.hpp"
#include "hypermap/semantic_map.hpp"
#include "hypermap/spectral_db.hpp"

namespace hypermap {

inline constexpr int kDefaultPort = 8787;

/// Raised when a mutation arrives while another one (usually classification) holds the gate.
class Busy : public Error {
public:
    using Error::Error;
};

struct ClassifyRecord {
    std::uint64_t db_version = 0;
    ClassifyParams params;
    SpectralDatabase db; // snapshot the labels were computed against
    Classification result;
};

struct SegmentRecord {
    std::shared_ptr<const ClassifyRecord> source;
    double min_area_m2 = 0.0;
    double thickness_px = 0.0;
    Segmentation seg;
};

inline nlohmann::json cube_info_json(const HyperCube& cube) {
    const auto& cam = cube.camera();
    return {{"width", cube.width()},
            {"height", cube.height()},
            {"bands", cube.bands()},
            {"wavelengths_nm", cube.wavelengths()},
            {"dtype", to_string(cube.sample_type())},
            {"h_m", cam.height_m},
            {"fov_deg", cam.fov_deg},
            {"pose", {cam.pose.x, cam.pose.y, cam.pose.yaw}}};
}

inline nlohmann::json spectrum_json(const Spectrum& s) {
    return {{"wavelengths_nm", s.wavelengths_nm}, {"values", s.values}};
}

inline nlohmann::json classification_json(const Classification& c) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [id, n] : c.counts) counts[std::to_string(id)] = n;
    return {{"counts", counts}, {"unknown_count", c.unknown_count}, {"time_s", c.seconds}};
}

inline nlohmann::json timings_json(const StageTimings& t) {
    return {{"classification", t.classification},
            {"edge_detection", t.edge_detection},
            {"contour_extraction", t.contour_extraction},
            {"size_filtering", t.size_filtering},
            {"polygon_approximation", t.polygon_approximation},
            {"total", t.total()}};
}

class Session {
public:
    explicit Session(HyperCube cube, SpectralDatabase db = {}, double map_resolution_m = kDefaultMapResolution)
        : cube_(std::move(cube)), db_(std::move(db)), map_(map_resolution_m) {
        cube_.validate();
        cube_.camera().validate();
    }

    /// Test hook, runs inside the gate right before classification starts.
    void set_classify_hook(std::function<void()> hook) { classify_hook_ = std::move(hook); }

    const HyperCube& cube() const { return cube_; }

    nlohmann::json cube_info() const { return cube_info_json(cube_); }

    nlohmann::json spectrum(int x, int y) const {
        check_pixel(x, y);
        return spectrum_json(pixel_spectrum(cube_, x, y));
    }

    std::vector<std::uint8_t> rgb_png() const { return png::encode_rgb(false_rgb(cube_)); }

    std::uint64_t db_version() const {
        std::shared_lock lock(state_);
        return version_;
    }

    SpectralDatabase database() const {
        std::shared_lock lock(state_);
        return db_;
    }

    nlohmann::json classes() const {
        std::shared_lock lock(state_);
        auto j = to_json(db_);
        j["version"] = version_;
        return j;
    }

    /// Body: {name, color, taxonomy?} plus either {x, y} or {spectrum}.
    nlohmann::json add_class(const nlohmann::json& body) {
        auto gate = enter();
        const auto name = field<std::string>(body, "name");
        const auto rgb = field<std::vector<int>>(body, "color");
        if (rgb.size() != 3) throw InvalidArgument("color must be [r,g,b]");
        Rgb color{};
        for (std::size_t k = 0; k < 3; ++k) {
            if (rgb[k] < 0 || rgb[k] > 255) throw InvalidArgument("color components must be in [0,255]");
            color[k] = std::uint8_t(rgb[k]);
        }
        Spectrum reference;
        if (body.contains("spectrum")) {
            reference.values = field<std::vector<double>>(body, "spectrum");
            if (reference.values.size() != std::size_t(cube_.bands()))
                throw InvalidArgument("spectrum must have " + std::to_string(cube_.bands()) + " values");
            reference.wavelengths_nm = cube_.wavelengths();
        } else if (body.contains("x") && body.contains("y")) {
            const int x = field<int>(body, "x"), y = field<int>(body, "y");
            check_pixel(x, y);
            reference = pixel_spectrum(cube_, x, y);
        } else {
            throw InvalidArgument("class needs either x,y or spectrum");
        }
        std::vector<std::string> taxonomy;
        if (body.contains("taxonomy")) taxonomy = field<std::vector<std::string>>(body, "taxonomy");

        std::unique_lock lock(state_);
        SpectralDatabase next = db_;
        const ClassId id = next.add_class(name, color, std::move(reference), std::move(taxonomy));
        commit_db(std::move(next));
        auto j = to_json(db_);
        return {{"id", id}, {"class", j["classes"].back()}, {"version", version_}};
    }

    nlohmann::json remove_class(ClassId id) {
        auto gate = enter();
        std::unique_lock lock(state_);
        SpectralDatabase next = db_;
        next.remove_class(id);
        commit_db(std::move(next));
        return {{"removed", id}, {"version", version_}};
    }

    /// Classifies against the current database; repeated calls with the same
    /// database version and params are served from the cache.
    nlohmann::json classify_request(const ClassifyParams& params) {
        auto gate = enter();
        params.validate();
        if (classify_hook_) classify_hook_();
        auto [record, cached] = classify_locked(params);
        auto j = classification_json(record->result);
        j["cached"] = cached;
        j["db_version"] = record->db_version;
        j["algorithm"] = to_string(params.algorithm);
        j["variance"] = params.variance;
        return j;
    }

    std::vector<std::uint8_t> labelmap_png() const {
        const auto rec = latest_classification();
        return png::encode_rgb(render_labels(rec->result.labels, rec->db));
    }

    std::shared_ptr<const ClassifyRecord> latest_classification() const {
        std::shared_lock lock(state_);
        if (!latest_) throw NotFound("no classification has been run");
        return latest_;
    }

    std::shared_ptr<const SegmentRecord> latest_segmentation() const {
        std::shared_lock lock(state_);
        if (!segmentation_) throw NotFound("no segmentation has been run");
        return segmentation_;
    }

    nlohmann::json segment_request(double min_area_m2, double thickness_px) {
        auto gate = enter();
        auto source = latest_classification();
        auto rec = std::make_shared<SegmentRecord>();
        rec->source = source;
        rec->min_area_m2 = min_area_m2;
        rec->thickness_px = thickness_px;
        rec->seg = segment(source->result.labels, cube_.camera(), min_area_m2, thickness_px);
        rec->seg.timings.classification = source->result.seconds;
        {
            std::unique_lock lock(state_);
            segmentation_ = rec;
        }
        return segmentation_json(*rec);
    }

    static nlohmann::json segmentation_json(const SegmentRecord& rec) {
        auto j = regions_to_geojson(rec.seg.regions, rec.source->db);
        j["times_s"] = timings_json(rec.seg.timings);
        j["region_count"] = rec.seg.regions.regions.size();
        return j;
    }

    nlohmann::json ingest_request(std::string frame_id) {
        auto gate = enter();
        auto rec = latest_segmentation();
        std::unique_lock lock(state_);
        if (frame_id.empty()) frame_id = "frame-" + std::to_string(map_.frames().size() + 1);
        map_.register_classes(rec->source->db);
        map_.ingest_frame(rec->seg.regions, cube_.camera(), frame_id);
        return {{"frame_id", frame_id},
                {"frames", map_.frames().size()},
                {"known_cells", map_.known_cells()},
                {"width", map_.grid().width},
                {"height", map_.grid().height}};
    }

    SemanticMap map_snapshot() const {
        std::shared_lock lock(state_);
        return map_;
    }

    nlohmann::json map_features() const {
        const SemanticMap m = map_snapshot();
        return features_to_geojson(m.extract_features(), m);
    }

    std::string ontology_dot_text() const {
        const SemanticMap m = map_snapshot();
        return ontology_dot(build_ontology(m, m.extract_features()));
    }

    nlohmann::json ontology_json_doc() const {
        const SemanticMap m = map_snapshot();
        return ontology_json(build_ontology(m, m.extract_features()));
    }

    template <class T>
    static T field(const nlohmann::json& body, const char* key) {
        if (!body.is_object() || !body.contains(key)) throw InvalidArgument(std::string("missing field '") + key + "'");
        try {
            return body.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw InvalidArgument(std::string("field '") + key + "' has the wrong type");
        }
    }

private:
    std::unique_lock<std::mutex> enter() {
        std::unique_lock gate(gate_, std::try_to_lock);
        if (!gate.owns_lock()) throw Busy("another mutation is in progress");
        return gate;
    }

    void check_pixel(int x, int y) const {
        if (x < 0 || y < 0 || x >= cube_.width() || y >= cube_.height())
            throw InvalidArgument("pixel (" + std::to_string(x) + "," + std::to_string(y) + ") is outside the cube");
    }

    // Caller holds state_ exclusively.
    void commit_db(SpectralDatabase next) {
        db_ = std::move(next);
        ++version_;
        cache_.clear(); // keys from older versions can never match again
    }

    using CacheKey = std::tuple<std::uint64_t, SimilarityAlgorithm, double>;

    std::pair<std::shared_ptr<const ClassifyRecord>, bool> classify_locked(const ClassifyParams& params) {
        std::shared_ptr<ClassifyRecord> rec;
        {
            std::shared_lock lock(state_);
            const CacheKey key{version_, params.algorithm, params.variance};
            if (auto it = cache_.find(key); it != cache_.end()) {
                lock.unlock();
                std::unique_lock w(state_);
                latest_ = it->second;
                return {it->second, true};
            }
            rec = std::make_shared<ClassifyRecord>();
            rec->db_version = version_;
            rec->params = params;
            rec->db = db_;
        }
        // Reads keep flowing while the classifier runs; the gate blocks other mutations.
        rec->result = classify(cube_, rec->db, params);
        std::unique_lock w(state_);
        cache_[{rec->db_version, params.algorithm, params.variance}] = rec;
        latest_ = rec;
        return {rec, false};
    }

    HyperCube cube_;
    SpectralDatabase db_;
    std::uint64_t version_ = 0;
    std::map<CacheKey, std::shared_ptr<const ClassifyRecord>> cache_;
    std::shared_ptr<const ClassifyRecord> latest_;
    std::shared_ptr<const SegmentRecord> segmentation_;
    SemanticMap map_;

    std::function<void()> classify_hook_;
    std::mutex gate_;
    mutable std::shared_mutex state_;
};

class Service {
public:
    explicit Service(Session& session) : session_(session) { mount(); }

    httplib::Server& server() { return server_; }

    /// Binds to 127.0.0.1 on a free port and serves on a background thread.
    int start_background(const std::string& host = "127.0.0.1") {
        const int port = server_.bind_to_any_port(host);
        if (port <= 0) throw IoError("cannot bind " + host);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port;
    }

    /// Blocking listen, used by the CLI.
    void listen(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    ~Service() { stop(); }

private:
    static void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json");
    }

    static void send_png(httplib::Response& res, const std::vector<std::uint8_t>& bytes) {
        res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "image/png");
    }

    static nlohmann::json body_of(const httplib::Request& req) {
        if (req.body.empty()) return nlohmann::json::object();
        try {
            return nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
        }
    }

    static int int_param(const httplib::Request& req, const char* key) {
        if (!req.has_param(key)) throw InvalidArgument(std::string("missing query parameter '") + key + "'");
        const std::string v = req.get_param_value(key);
        std::size_t used = 0;
        int out = 0;
        try {
            out = std::stoi(v, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != v.size()) throw InvalidArgument(std::string("query parameter '") + key + "' must be an integer");
        return out;
    }

    void mount() {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                     {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                     {"Access-Control-Allow-Headers", "Content-Type"}});
        server_.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

        server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            int status = 500;
            std::string msg = "internal error";
            try {
                std::rethrow_exception(ep);
            } catch (const Busy& e) {
                status = 409, msg = e.what();
            } catch (const NotFound& e) {
                status = 404, msg = e.what();
            } catch (const InvalidArgument& e) {
                status = 400, msg = e.what();
            } catch (const std::exception& e) {
                msg = e.what();
            }
            send_json(res, {{"error", msg}}, status);
        });

        auto& s = session_;
        server_.Get("/api/cube", [&s](const httplib::Request&, httplib::Response& res) { send_json(res, s.cube_info()); });
        server_.Get("/api/cube/rgb.png", [&s](const httplib::Request&, httplib::Response& res) { send_png(res, s.rgb_png()); });
        server_.Get("/api/cube/spectrum", [&s](const httplib::Request& req, httplib::Response& res) {
            send_json(res, s.spectrum(int_param(req, "x"), int_param(req, "y")));
        });
        server_.Get("/api/classes", [&s](const httplib::Request&, httplib::Response& res) { send_json(res, s.classes()); });
        server_.Post("/api/classes", [&s](const httplib::Request& req, httplib::Response& res) {
            send_json(res, s.add_class(body_of(req)), 201);
        });
        server_.Delete(R"(/api/classes/(\d+))", [&s](const httplib::Request& req, httplib::Response& res) {
            const unsigned long id = std::stoul(req.matches[1].str());
            if (id == 0 || id > 0xffff) throw NotFound("unknown class id " + req.matches[1].str());
            send_json(res, s.remove_class(ClassId(id)));
        });
        server_.Post("/api/classify", [&s](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            ClassifyParams p;
            if (body.contains("algorithm")) p.algorithm = parse_algorithm(Session::field<std::string>(body, "algorithm"));
            if (body.contains("variance")) p.variance = Session::field<double>(body, "variance");
            send_json(res, s.classify_request(p));
        });
        server_.Get("/api/labelmap.png", [&s](const httplib::Request&, httplib::Response& res) { send_png(res, s.labelmap_png()); });
        server_.Post("/api/segment", [&s](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            const double min_area = body.contains("min_area_m2") ? Session::field<double>(body, "min_area_m2") : 0.0;
            const double thickness = body.contains("thickness_px") ? Session::field<double>(body, "thickness_px") : 1.0;
            send_json(res, s.segment_request(min_area, thickness));
        });
        server_.Post("/api/map/frames", [&s](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_of(req);
            send_json(res, s.ingest_request(body.contains("frame_id") ? Session::field<std::string>(body, "frame_id") : ""), 201);
        });
        server_.Get("/api/map/features", [&s](const httplib::Request&, httplib::Response& res) { send_json(res, s.map_features()); });
        server_.Get("/api/map/ontology.dot", [&s](const httplib::Request&, httplib::Response& res) {
            res.set_content(s.ontology_dot_text(), "text/vnd.graphviz");
        });
        server_.Get("/api/map/ontology.json", [&s](const httplib::Request&, httplib::Response& res) {
            send_json(res, s.ontology_json_doc());
        });
    }

    Session& session_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace hypermap
