#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/backends.hpp"
#include "curator/geometry.hpp"

namespace curator {

/// Every Stage-1 measurement for one generated image.
struct ScoreCard {
    double s_det = 0.0;           // target-class confidence, 0 without a detection
    std::optional<Box> b_det;     // highest-confidence target detection
    int detection_count = 0;
    double s_aes = 0.0;
    std::string caption;
    double s_vlm = 0.0;           // cos(embed(caption), embed(prompt))
    std::optional<double> iou_mask;  // IoU(b_det, mask); present iff b_det is
    /// Set when a backend call failed; names the component ("detector", ...).
    std::optional<std::string> incomplete_component;
    std::string error;
    nlohmann::json backend_ids = nlohmann::json::object();

    bool complete() const noexcept { return !incomplete_component.has_value(); }
    friend bool operator==(const ScoreCard&, const ScoreCard&) = default;
};

/// Pass requires value > threshold on every gate. Defaults are the case-study
/// values; all are adjustable through the pipeline config.
struct GateThresholds {
    double min_s_det = 0.8;
    double min_s_aes = 5.0;
    double min_iou = 0.8;
    double min_s_vlm = 0.8;

    friend bool operator==(const GateThresholds&, const GateThresholds&) = default;
};

void validate(const GateThresholds& t);

struct GateOutcome {
    std::optional<double> value;
    double threshold = 0.0;
    bool passed = false;
    bool skipped = false;  // could not be evaluated; counts as failed

    friend bool operator==(const GateOutcome&, const GateOutcome&) = default;
};

struct GateDecision {
    bool passed = false;
    std::map<std::string, GateOutcome> per_gate;  // "s_det", "iou", "s_aes", "s_vlm"
    std::vector<std::string> failure_reasons;

    friend bool operator==(const GateDecision&, const GateDecision&) = default;
};

inline constexpr const char* kGateNames[4] = {"s_det", "iou", "s_aes", "s_vlm"};

/// Queries detector, aesthetics, captioner and embedder for one image. Backend
/// failures produce an incomplete card instead of throwing.
ScoreCard score_candidate(const Backends& backends, const std::string& image_id,
                          const std::string& target_class, const std::string& prompt,
                          const Box& mask);

/// Evaluates all four gates without short-circuiting. Without a detection the
/// detection gate fails and the other three are recorded as skipped.
GateDecision apply_gates(const ScoreCard& card, const GateThresholds& t);

void to_json(nlohmann::json& j, const ScoreCard& c);
void from_json(const nlohmann::json& j, ScoreCard& c);
void to_json(nlohmann::json& j, const GateThresholds& t);
void from_json(const nlohmann::json& j, GateThresholds& t);
void to_json(nlohmann::json& j, const GateDecision& d);
void from_json(const nlohmann::json& j, GateDecision& d);

}  // namespace curator
