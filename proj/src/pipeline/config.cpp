#include "curator/pipeline/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "curator/errors.hpp"
#include "curator/json_io.hpp"

namespace curator {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool valid_run_id(const std::string& id) {
    if (id.empty() || id.size() > 64 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '-' || c == '_' || c == '.';
    });
}

}  // namespace

void validate(const PipelineConfig& c) {
    if (!valid_run_id(c.run_id))
        throw ConfigError("run_id must be 1..64 characters from [A-Za-z0-9._-], got '" + c.run_id + "'");
    if (c.background_dir.empty()) throw ConfigError("background_dir is required");
    if (c.target_class.empty()) throw ConfigError("target_class is required");
    if (c.prompt.empty()) throw ConfigError("prompt is required");
    if (lower(c.prompt).find(lower(c.target_class)) == std::string::npos)
        throw ConfigError("prompt must mention the target object '" + c.target_class + "'");
    try {
        validate(c.roi);
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("roi: ") + e.what());
    }
    if (c.candidates_per_background < 1) throw ConfigError("candidates_per_background must be >= 1");
    validate(c.gate_thresholds);
    validate(c.train);
    if (c.concurrency < 1 || c.concurrency > 256) throw ConfigError("concurrency must lie in [1, 256]");
    if (!(c.stage3_threshold >= 0.0 && c.stage3_threshold < 1.0))
        throw ConfigError("stage3_threshold must lie in [0, 1)");
    if (!(c.expand_ratio >= 0.0) || !std::isfinite(c.expand_ratio))
        throw ConfigError("expand_ratio must be nonnegative");
    if (const auto& s = c.simulated_annotation) {
        if (s->annotators < 1) throw ConfigError("simulated_annotation.annotators must be >= 1");
        if (!(s->flip_rate >= 0.0 && s->flip_rate <= 0.5))
            throw ConfigError("simulated_annotation.flip_rate must lie in [0, 0.5]");
        if (!(s->label_fraction > 0.0 && s->label_fraction <= 1.0))
            throw ConfigError("simulated_annotation.label_fraction must lie in (0, 1]");
    }
}

void to_json(json& j, const PipelineConfig& c) {
    j = {{"run_id", c.run_id},
         {"background_dir", c.background_dir.string()},
         {"target_class", c.target_class},
         {"prompt", c.prompt},
         {"roi", c.roi},
         {"candidates_per_background", c.candidates_per_background},
         {"gate_thresholds", c.gate_thresholds},
         {"train", c.train},
         {"backends", c.backends},
         {"master_seed", c.master_seed},
         {"concurrency", c.concurrency},
         {"resolution", to_string(c.resolution)},
         {"stage3_threshold", c.stage3_threshold},
         {"expand_ratio", c.expand_ratio}};
    if (const auto& s = c.simulated_annotation) {
        j["simulated_annotation"] = {{"annotators", s->annotators},
                                     {"flip_rate", s->flip_rate},
                                     {"label_fraction", s->label_fraction},
                                     {"seed", s->seed}};
    }
}

void from_json(const json& j, PipelineConfig& c) {
    try {
        c = PipelineConfig{};
        c.run_id = j.at("run_id").get<std::string>();
        c.background_dir = j.at("background_dir").get<std::string>();
        c.target_class = j.at("target_class").get<std::string>();
        c.prompt = j.at("prompt").get<std::string>();
        c.roi = j.at("roi").get<RoiSpec>();
        c.candidates_per_background = j.value("candidates_per_background", c.candidates_per_background);
        if (j.contains("gate_thresholds")) c.gate_thresholds = j.at("gate_thresholds").get<GateThresholds>();
        if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
        if (j.contains("backends")) c.backends = j.at("backends").get<BackendsConfig>();
        c.master_seed = j.value("master_seed", c.master_seed);
        c.concurrency = j.value("concurrency", c.concurrency);
        c.resolution = parse_resolution(j.value("resolution", std::string("majority")));
        c.stage3_threshold = j.value("stage3_threshold", c.stage3_threshold);
        c.expand_ratio = j.value("expand_ratio", c.expand_ratio);
        if (j.contains("simulated_annotation") && !j.at("simulated_annotation").is_null()) {
            const json& s = j.at("simulated_annotation");
            SimulatedAnnotation sim;
            sim.annotators = s.value("annotators", sim.annotators);
            sim.flip_rate = s.value("flip_rate", sim.flip_rate);
            sim.label_fraction = s.value("label_fraction", sim.label_fraction);
            sim.seed = s.value("seed", sim.seed);
            c.simulated_annotation = sim;
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid pipeline config: ") + e.what());
    } catch (const ValidationError& e) {
        throw ConfigError(std::string("invalid pipeline config: ") + e.what());
    }
    validate(c);
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty path segment in override " + key);
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
}

void apply_environment(PipelineConfig& c) {
    const char* url = std::getenv("CURATOR_BACKEND_URL");
    if (!url || !*url) return;
    c.backends.fallback.kind = "http";
    c.backends.fallback.endpoint.base_url = url;
    for (auto& [name, spec] : c.backends.overrides) {
        spec.kind = "http";
        spec.endpoint.base_url = url;
    }
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
    for (const std::string& o : overrides) apply_override(doc, o);
    // Relative paths are relative to the config file.
    const auto resolve = [&](json& v) {
        if (v.is_string()) {
            const std::filesystem::path p = v.get<std::string>();
            if (p.is_relative()) v = (path.parent_path() / p).lexically_normal().string();
        }
    };
    if (doc.contains("background_dir")) resolve(doc["background_dir"]);
    if (doc.contains("backends")) {
        json& b = doc["backends"];
        if (b.contains("fixture")) resolve(b["fixture"]);
        if (b.contains("services"))
            for (auto& [k, v] : b["services"].items())
                if (v.contains("fixture")) resolve(v["fixture"]);
    }
    PipelineConfig c = doc.get<PipelineConfig>();
    apply_environment(c);
    validate(c);
    return c;
}

}  // namespace curator
