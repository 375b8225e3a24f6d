#include "curator/json_io.hpp"

#include "curator/errors.hpp"

namespace curator {

using nlohmann::json;

void to_json(json& j, const Box& b) { j = json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

void from_json(const json& j, Box& b) {
    if (!j.is_array() || j.size() != 4)
        throw ValidationError("box must be [x_min, y_min, x_max, y_max], got " + j.dump());
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    validate(b);
}

void to_json(json& j, const ImageDims& d) { j = {{"width", d.width}, {"height", d.height}}; }

void from_json(const json& j, ImageDims& d) {
    d = {j.at("width").get<int>(), j.at("height").get<int>()};
    validate(d);
}

void to_json(json& j, const RoiSpec& s) {
    j = {{"roi", s.roi}, {"mask_width", s.mask_width}, {"mask_height", s.mask_height}};
}

void from_json(const json& j, RoiSpec& s) {
    s.roi = j.at("roi").get<Box>();
    s.mask_width = j.at("mask_width").get<double>();
    s.mask_height = j.at("mask_height").get<double>();
    validate(s);
}

void to_json(json& j, const EmbeddingVector& v) {
    j = json::array();
    for (double x : v.values()) j.push_back(x);
}

void from_json(const json& j, EmbeddingVector& v) {
    if (!j.is_array()) throw ValidationError("vector must be a JSON array");
    v = EmbeddingVector(j.get<std::vector<double>>());
}

void to_json(json& j, const Detection& d) {
    j = {{"label", d.class_label}, {"confidence", d.confidence}, {"box", d.box}};
}

void from_json(const json& j, Detection& d) {
    d.class_label = j.at("label").get<std::string>();
    d.confidence = j.at("confidence").get<double>();
    d.box = j.at("box").get<Box>();
}

void to_json(json& j, const BackendEndpoint& e) {
    j = {{"base_url", e.base_url}, {"timeout", e.timeout_seconds}, {"retry_limit", e.retry_limit}};
}

void from_json(const json& j, BackendEndpoint& e) {
    e.base_url = j.value("base_url", e.base_url);
    e.timeout_seconds = j.value("timeout", e.timeout_seconds);
    e.retry_limit = j.value("retry_limit", e.retry_limit);
}

void to_json(json& j, const BackendSpec& s) {
    j = {{"kind", s.kind},           {"seed", s.seed},
         {"embed_dim", s.embed_dim}, {"global_dim", s.global_dim},
         {"spatial_dim", s.spatial_dim}};
    if (!s.fixture.empty()) j["fixture"] = s.fixture;
    if (s.kind == "http") j["endpoint"] = s.endpoint;
}

void from_json(const json& j, BackendSpec& s) {
    s.kind = j.value("kind", s.kind);
    s.seed = j.value("seed", s.seed);
    s.fixture = j.value("fixture", s.fixture);
    s.embed_dim = j.value("embed_dim", s.embed_dim);
    s.global_dim = j.value("global_dim", s.global_dim);
    s.spatial_dim = j.value("spatial_dim", s.spatial_dim);
    if (j.contains("endpoint")) s.endpoint = j.at("endpoint").get<BackendEndpoint>();
}

void to_json(json& j, const BackendsConfig& c) {
    j = c.fallback;
    if (!c.overrides.empty()) {
        json o = json::object();
        for (const auto& [k, v] : c.overrides) o[k] = v;
        j["services"] = o;
    }
}

void from_json(const json& j, BackendsConfig& c) {
    c.fallback = j.get<BackendSpec>();
    c.overrides.clear();
    if (j.contains("services")) {
        for (const auto& [k, v] : j.at("services").items()) {
            // Service entries inherit every field they do not set.
            BackendSpec s = c.fallback;
            from_json(v, s);
            c.overrides[k] = s;
        }
    }
}

}  // namespace curator
