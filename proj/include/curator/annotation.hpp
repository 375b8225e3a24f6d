#pragma once

// Stage-2 annotation: a durable per-run label log plus the HTTP API that the
// annotation UI talks to.
//
// Label log (<workspace>/<run_id>/labels.jsonl), one JSON object per line,
// appended and fsync'ed before a submission is acknowledged:
//
//   {"seq": 7, "candidate_id": "...", "annotator_id": "ann-2",
//    "label": "accept", "annotated_at": "2026-01-05T10:22:41.118Z"}
//
// The current view keeps the highest-seq record per (candidate, annotator).
// A torn final line (crash mid-write) is discarded on open.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "curator/image_store.hpp"
#include "curator/metrics.hpp"

namespace curator {

struct AnnotationRecord {
    std::int64_t seq = 0;
    std::string candidate_id;
    std::string annotator_id;
    Label label = Label::reject;
    std::string annotated_at;

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);

/// Throws ValidationError unless id is 1..128 printable ASCII characters.
void validate_annotator_id(const std::string& id);

/// Append-only label log for one run.
class LabelStore {
public:
    explicit LabelStore(std::filesystem::path path);

    const std::filesystem::path& path() const noexcept { return path_; }

    /// Assigns the next seq, appends, fsyncs and returns the stored record.
    AnnotationRecord append(const std::string& candidate_id, const std::string& annotator_id,
                            Label label, const std::string& annotated_at);

    /// Every record in log order.
    std::vector<AnnotationRecord> log() const;
    /// Current label per (candidate_id, annotator_id).
    std::map<std::pair<std::string, std::string>, AnnotationRecord> current() const;

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::vector<AnnotationRecord> records_;
    std::map<std::pair<std::string, std::string>, AnnotationRecord> current_;
};

/// What the annotation service needs to know about one candidate.
struct ReviewCandidate {
    std::string candidate_id;
    std::string image_id;
    bool stage1_passed = false;
    nlohmann::json details = nlohmann::json::object();  // score card, mask, b_det
};

/// Source of candidates per run, in generation (oldest-first) order.
class CandidateCatalog {
public:
    virtual ~CandidateCatalog() = default;
    /// nullopt if the run does not exist.
    virtual std::optional<std::vector<ReviewCandidate>> candidates(const std::string& run_id) const = 0;
};

struct QueueState {
    std::int64_t pending = 0;
    std::int64_t labeled = 0;
    std::int64_t total = 0;
};

enum class Resolution { majority, any };
std::string to_string(Resolution r);
Resolution parse_resolution(const std::string& s);

struct ExportedLabel {
    std::string candidate_id;
    std::string image_id;
    Label label = Label::reject;
    std::string annotator_id;  // "any" mode only
    int accept_votes = 0;
    int reject_votes = 0;

    friend bool operator==(const ExportedLabel&, const ExportedLabel&) = default;
};

struct LabelExport {
    Resolution resolution = Resolution::majority;
    std::vector<ExportedLabel> examples;  // sorted by candidate_id, then annotator_id
    std::vector<std::string> ties;        // majority mode: candidates with split votes

    friend bool operator==(const LabelExport&, const LabelExport&) = default;
};

nlohmann::json export_json(const std::string& run_id, const LabelExport& e);

/// One label store per run under workspace/<run_id>/labels.jsonl.
class AnnotationService {
public:
    using Clock = std::function<std::string()>;

    AnnotationService(std::filesystem::path workspace, std::shared_ptr<const CandidateCatalog> catalog,
                      std::shared_ptr<ImageStore> images, Clock clock = {});

    /// Up to count stage1_passed candidates this annotator has not labeled.
    std::vector<ReviewCandidate> next_pending(const std::string& run_id, const std::string& annotator_id,
                                              int count) const;

    /// NotFoundError for unknown run/candidate, ConflictError for a candidate
    /// that failed Stage 1.
    AnnotationRecord submit_label(const std::string& run_id, const std::string& candidate_id,
                                  Label label, const std::string& annotator_id);

    /// Per-annotator view when annotator_id is set; otherwise a candidate
    /// counts as labeled once anyone has labeled it.
    QueueState progress(const std::string& run_id, const std::optional<std::string>& annotator_id) const;

    /// EmptyExportError when the run has no labels.
    LabelExport export_labels(const std::string& run_id, Resolution resolution) const;

    ImageStore& images() const { return *images_; }

    static std::filesystem::path label_log_path(const std::filesystem::path& workspace,
                                                const std::string& run_id);

private:
    std::vector<ReviewCandidate> run_candidates(const std::string& run_id) const;
    LabelStore& store_for(const std::string& run_id) const;

    std::filesystem::path workspace_;
    std::shared_ptr<const CandidateCatalog> catalog_;
    std::shared_ptr<ImageStore> images_;
    Clock clock_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::unique_ptr<LabelStore>> stores_;
};

/// UTC now as 2026-01-05T10:22:41.118Z.
std::string utc_timestamp();

struct AnnotationServerOptions {
    std::string cors_origin = "*";
};

/// HTTP JSON API under /api/v1:
///   GET  /runs/{id}/queue?annotator=&count=
///   GET  /images/{id}
///   POST /runs/{id}/labels     {candidate_id, label, annotator_id}
///   GET  /runs/{id}/progress[?annotator=]
///   GET  /runs/{id}/export?resolution=majority|any
/// Errors are {"error": message, "kind": ...} with 400/404/409.
class AnnotationServer {
public:
    AnnotationServer(std::shared_ptr<AnnotationService> service, AnnotationServerOptions options = {});
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Serves on a background thread; returns the bound port (0 picks one).
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void listen(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace curator
