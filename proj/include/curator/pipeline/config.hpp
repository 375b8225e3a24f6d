#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/annotation.hpp"
#include "curator/backends.hpp"
#include "curator/classifier/trainer.hpp"
#include "curator/gate.hpp"
#include "curator/geometry.hpp"

namespace curator {

/// Stand-in for human annotators when running end to end against mocks.
/// Each annotator labels a candidate accept iff the projection of its global
/// features onto a seeded random direction is positive, then flips the label
/// with probability flip_rate.
struct SimulatedAnnotation {
    int annotators = 5;
    double flip_rate = 0.1;
    /// Fraction of stage1_passed candidates (oldest first) that get labels;
    /// the rest flow through Stage 3 unannotated and form the evaluation set.
    double label_fraction = 0.3;
    std::uint64_t seed = 0;

    friend bool operator==(const SimulatedAnnotation&, const SimulatedAnnotation&) = default;
};

struct PipelineConfig {
    std::string run_id;
    std::filesystem::path background_dir;
    std::string target_class;
    std::string prompt;
    RoiSpec roi;
    int candidates_per_background = 10;
    GateThresholds gate_thresholds;
    TrainConfig train;
    BackendsConfig backends;
    std::uint64_t master_seed = 0;
    int concurrency = 4;
    Resolution resolution = Resolution::majority;
    double stage3_threshold = 0.5;
    double expand_ratio = 0.3;
    std::optional<SimulatedAnnotation> simulated_annotation;
};

/// Throws ConfigError on any invalid or inconsistent field.
void validate(const PipelineConfig& c);

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Missing optional fields take their defaults; validates the result.
void from_json(const nlohmann::json& j, PipelineConfig& c);

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// CURATOR_BACKEND_URL switches every service to the HTTP transport at
/// that base URL.
void apply_environment(PipelineConfig& c);

/// Reads a config file, applies overrides in order, then the environment.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace curator
