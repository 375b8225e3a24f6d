#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/backends.hpp"
#include "curator/classifier/checkpoint.hpp"
#include "curator/pipeline/config.hpp"
#include "curator/pipeline/run_store.hpp"

namespace curator {

struct Stage1Options {
    /// Re-run candidates whose previous attempt hit a backend failure.
    bool retry_incomplete = false;
    /// Stop after this many newly processed candidates (simulates a crash).
    std::optional<std::size_t> stop_after;
};

struct Stage1Stats {
    std::size_t total = 0;      // candidates the config asks for
    std::size_t processed = 0;  // newly processed in this call
    std::size_t skipped = 0;    // already on disk
    std::size_t passed = 0;     // over all recorded candidates
    std::size_t failed = 0;
    std::size_t incomplete = 0;
};

struct SimulationStats {
    std::size_t candidates_labeled = 0;
    std::size_t records_written = 0;
};

struct Stage2Result {
    Checkpoint checkpoint;
    TrainReport report;
    std::size_t examples = 0;
    std::vector<std::string> ties;
    std::vector<std::string> feature_failures;
};

struct Stage3Stats {
    std::size_t scored = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t features_unavailable = 0;
};

/// Per-candidate seed: stable hash of (run_id, background_id, index) mixed
/// with the master seed.
std::uint64_t candidate_seed(const std::string& run_id, const std::string& background_id, int index,
                             std::uint64_t master_seed);

/// Feature crop for the classifier: the detected box when present, else the
/// mask, expanded by `ratio` and clamped to the image.
Box classifier_crop(const GenerationCandidate& c, double ratio, const ImageDims& dims);

/// Holdout labels for evaluation. Accepts a label export document
/// ({"examples": [...]}), an array of {"candidate_id", "label"} records, a
/// {"<candidate_id>": "accept"|"reject"} object, or JSON Lines of records.
/// ValidationError on conflicting labels for one candidate.
std::map<std::string, Label> load_holdout_labels(const std::filesystem::path& p);

/// Drives one run through ingest, Stage 1, annotation, Stage 2 and Stage 3.
/// All state lives in the workspace, so every step can be re-invoked and
/// resumes from what is already on disk.
class Pipeline {
public:
    /// Builds backends from the config.
    Pipeline(Workspace ws, PipelineConfig cfg);
    Pipeline(Workspace ws, PipelineConfig cfg, Backends backends);

    const PipelineConfig& config() const noexcept { return cfg_; }
    const Workspace& workspace() const noexcept { return ws_; }
    const Backends& backends() const noexcept { return backends_; }

    /// Registers every image in background_dir (sorted by filename) and
    /// snapshots the config. ConfigError if the directory has no images or
    /// the ROI does not fit a background.
    std::vector<BackgroundRecord> ingest();

    /// Ingests first when the run does not exist yet.
    Stage1Stats run_stage1(const Stage1Options& opts = {});

    /// Labels candidates with simulated annotators through the label store.
    /// Requires config.simulated_annotation.
    SimulationStats simulate_annotation();

    /// EmptyExportError without labels; ValidationError (with a progress
    /// hint) when labels cover only one class.
    Stage2Result run_stage2();

    Stage3Stats run_stage3();

    /// Confusion counts and P/R/F1 of the trained classifier against
    /// holdout labels; written to eval.json.
    nlohmann::json evaluate(const std::map<std::string, Label>& holdout, const std::string& source);

    /// Holdout = stage1_passed candidates without labels, scored against the
    /// noise-free simulated preference.
    nlohmann::json evaluate_simulated();

    /// Writes manifest.json and summary.txt; returns the manifest.
    nlohmann::json write_manifest();

    /// Every stage in order, resuming whatever is already done.
    nlohmann::json run_all(const Stage1Options& opts = {});

    std::shared_ptr<AnnotationService> annotation_service() const;

private:
    GenerationCandidate process_candidate(const BackgroundRecord& bg, int index) const;
    std::optional<Label> simulated_truth(const GenerationCandidate& c, const ImageDims& dims) const;
    void check_run_config() const;

    Workspace ws_;
    PipelineConfig cfg_;
    Backends backends_;
};

}  // namespace curator
