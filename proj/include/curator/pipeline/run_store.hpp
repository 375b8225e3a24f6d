#pragma once

// On-disk layout of a workspace:
//
//   <workspace>/images/               content-addressed image store
//   <workspace>/<run_id>/config.json  config snapshot
//                        backgrounds.json
//                        stage1.jsonl  one candidate record per line; the last
//                                      record for a candidate id wins
//                        labels.jsonl  annotation log
//                        stage2.json   export, training summary
//                        model.json    classifier checkpoint
//                        train_report.json
//                        stage3.json   per-candidate probabilities and decisions
//                        eval.json
//                        manifest.json, summary.txt

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/annotation.hpp"
#include "curator/image_store.hpp"
#include "curator/pipeline/candidate.hpp"
#include "curator/pipeline/config.hpp"

namespace curator {

struct BackgroundRecord {
    std::string background_id;
    std::string filename;
    ImageDims dims;

    friend bool operator==(const BackgroundRecord&, const BackgroundRecord&) = default;
};

void to_json(nlohmann::json& j, const BackgroundRecord& b);
void from_json(const nlohmann::json& j, BackgroundRecord& b);

class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path run_dir(const std::string& run_id) const { return root_ / run_id; }
    std::filesystem::path run_file(const std::string& run_id, const std::string& name) const {
        return root_ / run_id / name;
    }
    const std::shared_ptr<ImageStore>& images() const noexcept { return images_; }
    bool has_run(const std::string& run_id) const;

private:
    std::filesystem::path root_;
    std::shared_ptr<ImageStore> images_;
};

/// Serialized appends to a run's stage1.jsonl.
class Stage1Log {
public:
    explicit Stage1Log(std::filesystem::path path);
    /// Latest record per candidate id.
    std::map<std::string, GenerationCandidate> latest() const;
    void append(const GenerationCandidate& c);

private:
    std::filesystem::path path_;
    std::mutex mu_;
};

std::vector<BackgroundRecord> load_backgrounds(const Workspace& ws, const std::string& run_id);

/// Everything persisted for one run, with later-stage results folded into
/// each candidate. Candidates are ordered by background order, then index.
struct RunState {
    PipelineConfig config;
    std::vector<BackgroundRecord> backgrounds;
    std::vector<GenerationCandidate> candidates;
    nlohmann::json stage2;      // null until Stage 2 has run
    nlohmann::json stage3;      // null until Stage 3 has run
    nlohmann::json evaluation;  // null until evaluated
};

/// NotFoundError if the run was never ingested.
RunState load_run(const Workspace& ws, const std::string& run_id);

/// Stage-1 candidates of a run for the annotation service, read fresh on
/// every call so a live Stage 1 shows up in the queue.
class WorkspaceCatalog final : public CandidateCatalog {
public:
    explicit WorkspaceCatalog(Workspace ws) : ws_(std::move(ws)) {}
    std::optional<std::vector<ReviewCandidate>> candidates(const std::string& run_id) const override;

private:
    Workspace ws_;
};

nlohmann::json read_json_file(const std::filesystem::path& p);

}  // namespace curator
