#include "curator/gate.hpp"

#include <cmath>
#include <sstream>

#include "curator/errors.hpp"
#include "curator/json_io.hpp"

namespace curator {

using nlohmann::json;

void validate(const GateThresholds& t) {
    for (double v : {t.min_s_det, t.min_s_aes, t.min_iou, t.min_s_vlm}) {
        if (!std::isfinite(v)) throw ConfigError("gate thresholds must be finite");
    }
}

ScoreCard score_candidate(const Backends& backends, const std::string& image_id,
                          const std::string& target_class, const std::string& prompt,
                          const Box& mask) {
    ScoreCard card;
    card.backend_ids = {{"detector", backends.detector->id()},
                        {"aesthetic", backends.aesthetic->id()},
                        {"captioner", backends.captioner->id()},
                        {"embedder", backends.embedder->id()}};
    const char* component = "detector";
    try {
        const std::vector<Detection> dets = backends.detector->detect(image_id, target_class);
        card.detection_count = static_cast<int>(dets.size());
        if (!dets.empty()) {
            // normalize_detections sorts descending, so front() is the best hit.
            card.s_det = dets.front().confidence;
            card.b_det = dets.front().box;
            card.iou_mask = iou(*card.b_det, mask);
        }
        component = "aesthetic";
        card.s_aes = backends.aesthetic->score(image_id);
        if (!std::isfinite(card.s_aes)) throw NumericError("aesthetic score is not finite");
        component = "captioner";
        card.caption = backends.captioner->caption(image_id, prompt);
        component = "embedder";
        const EmbeddingVector caption_vec = backends.embedder->embed(card.caption);
        const EmbeddingVector prompt_vec = backends.embedder->embed(prompt);
        card.s_vlm = cosine_similarity(caption_vec, prompt_vec);
    } catch (const std::exception& e) {
        card.incomplete_component = component;
        card.error = e.what();
    }
    return card;
}

GateDecision apply_gates(const ScoreCard& card, const GateThresholds& t) {
    GateDecision d;
    auto reason = [&](const std::string& gate, double value, double threshold) {
        std::ostringstream os;
        os << gate << " " << value << " <= " << threshold;
        d.failure_reasons.push_back(os.str());
    };

    if (!card.complete()) {
        for (const char* g : kGateNames) d.per_gate[g] = {std::nullopt, 0.0, false, true};
        d.per_gate["s_det"].threshold = t.min_s_det;
        d.per_gate["iou"].threshold = t.min_iou;
        d.per_gate["s_aes"].threshold = t.min_s_aes;
        d.per_gate["s_vlm"].threshold = t.min_s_vlm;
        d.failure_reasons.push_back("incomplete: " + *card.incomplete_component);
        d.passed = false;
        return d;
    }

    if (!card.b_det) {
        d.per_gate["s_det"] = {card.s_det, t.min_s_det, false, false};
        d.failure_reasons.push_back("no detection of target class");
        d.per_gate["iou"] = {std::nullopt, t.min_iou, false, true};
        d.per_gate["s_aes"] = {card.s_aes, t.min_s_aes, false, true};
        d.per_gate["s_vlm"] = {card.s_vlm, t.min_s_vlm, false, true};
        d.passed = false;
        return d;
    }

    auto gate = [&](const char* name, double value, double threshold) {
        const bool ok = value > threshold;
        d.per_gate[name] = {value, threshold, ok, false};
        if (!ok) reason(name, value, threshold);
        return ok;
    };
    // Evaluate every gate so the manifest carries full diagnostics.
    const bool det = gate("s_det", card.s_det, t.min_s_det);
    const bool spatial = gate("iou", card.iou_mask.value_or(0.0), t.min_iou);
    const bool aes = gate("s_aes", card.s_aes, t.min_s_aes);
    const bool vlm = gate("s_vlm", card.s_vlm, t.min_s_vlm);
    d.passed = det && spatial && aes && vlm;
    return d;
}

void to_json(json& j, const ScoreCard& c) {
    j = {{"s_det", c.s_det},
         {"b_det", c.b_det ? json(*c.b_det) : json(nullptr)},
         {"detection_count", c.detection_count},
         {"s_aes", c.s_aes},
         {"caption", c.caption},
         {"s_vlm", c.s_vlm},
         {"iou_mask", c.iou_mask ? json(*c.iou_mask) : json(nullptr)},
         {"complete", c.complete()},
         {"backends", c.backend_ids}};
    if (c.incomplete_component) {
        j["incomplete_component"] = *c.incomplete_component;
        j["error"] = c.error;
    }
}

void from_json(const json& j, ScoreCard& c) {
    c = ScoreCard{};
    c.s_det = j.at("s_det").get<double>();
    if (!j.at("b_det").is_null()) c.b_det = j.at("b_det").get<Box>();
    c.detection_count = j.value("detection_count", c.b_det ? 1 : 0);
    c.s_aes = j.at("s_aes").get<double>();
    c.caption = j.at("caption").get<std::string>();
    c.s_vlm = j.at("s_vlm").get<double>();
    if (!j.at("iou_mask").is_null()) c.iou_mask = j.at("iou_mask").get<double>();
    if (j.contains("incomplete_component")) {
        c.incomplete_component = j.at("incomplete_component").get<std::string>();
        c.error = j.value("error", std::string());
    }
    c.backend_ids = j.value("backends", json::object());
    if (c.b_det.has_value() != c.iou_mask.has_value())
        throw ValidationError("score card: iou_mask must be present exactly when b_det is");
}

void to_json(json& j, const GateThresholds& t) {
    j = {{"min_s_det", t.min_s_det}, {"min_s_aes", t.min_s_aes},
         {"min_iou", t.min_iou},     {"min_s_vlm", t.min_s_vlm},
         {"comparison", "strict-greater"}};
}

void from_json(const json& j, GateThresholds& t) {
    t.min_s_det = j.value("min_s_det", t.min_s_det);
    t.min_s_aes = j.value("min_s_aes", t.min_s_aes);
    t.min_iou = j.value("min_iou", t.min_iou);
    t.min_s_vlm = j.value("min_s_vlm", t.min_s_vlm);
    if (j.value("comparison", std::string("strict-greater")) != "strict-greater")
        throw ConfigError("only strict-greater gate comparison is supported");
    validate(t);
}

void to_json(json& j, const GateDecision& d) {
    json gates = json::object();
    for (const auto& [name, g] : d.per_gate) {
        gates[name] = {{"value", g.value ? json(*g.value) : json(nullptr)},
                       {"threshold", g.threshold},
                       {"passed", g.passed},
                       {"skipped", g.skipped}};
    }
    j = {{"passed", d.passed}, {"per_gate", gates}, {"failure_reasons", d.failure_reasons}};
}

void from_json(const json& j, GateDecision& d) {
    d = GateDecision{};
    d.passed = j.at("passed").get<bool>();
    for (const auto& [name, g] : j.at("per_gate").items()) {
        GateOutcome o;
        if (!g.at("value").is_null()) o.value = g.at("value").get<double>();
        o.threshold = g.at("threshold").get<double>();
        o.passed = g.at("passed").get<bool>();
        o.skipped = g.value("skipped", false);
        d.per_gate[name] = o;
    }
    d.failure_reasons = j.at("failure_reasons").get<std::vector<std::string>>();
}

}  // namespace curator
