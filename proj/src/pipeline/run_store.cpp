#include "curator/pipeline/run_store.hpp"

#include <algorithm>
#include <fstream>

#include "curator/errors.hpp"
#include "curator/json_io.hpp"
#include "curator/jsonl.hpp"

namespace curator {

using nlohmann::json;
namespace fs = std::filesystem;

void to_json(json& j, const BackgroundRecord& b) {
    j = {{"background_id", b.background_id}, {"filename", b.filename}, {"width", b.dims.width},
         {"height", b.dims.height}};
}

void from_json(const json& j, BackgroundRecord& b) {
    b.background_id = j.at("background_id").get<std::string>();
    b.filename = j.at("filename").get<std::string>();
    b.dims = {j.at("width").get<int>(), j.at("height").get<int>()};
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError(p.string() + " is not valid JSON");
    return j;
}

Workspace::Workspace(fs::path root)
    : root_(std::move(root)), images_(std::make_shared<ImageStore>(root_ / "images")) {}

bool Workspace::has_run(const std::string& run_id) const {
    return !run_id.empty() && run_id.find('/') == std::string::npos && run_id != "images" &&
           fs::exists(run_file(run_id, "backgrounds.json"));
}

Stage1Log::Stage1Log(fs::path path) : path_(std::move(path)) {}

std::map<std::string, GenerationCandidate> Stage1Log::latest() const {
    std::map<std::string, GenerationCandidate> out;
    for (const json& j : read_jsonl(path_)) {
        GenerationCandidate c;
        try {
            c = j.get<GenerationCandidate>();
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception& e) {
            throw FormatError("bad candidate record in " + path_.string() + ": " + e.what());
        }
        const std::string id = c.candidate_id;
        out[id] = std::move(c);
    }
    return out;
}

void Stage1Log::append(const GenerationCandidate& c) {
    std::lock_guard lock(mu_);
    append_jsonl(path_, json(c));
}

std::vector<BackgroundRecord> load_backgrounds(const Workspace& ws, const std::string& run_id) {
    if (!ws.has_run(run_id)) throw NotFoundError("unknown run '" + run_id + "' (run ingest first)");
    return read_json_file(ws.run_file(run_id, "backgrounds.json")).get<std::vector<BackgroundRecord>>();
}

namespace {

std::vector<GenerationCandidate> ordered_candidates(const Workspace& ws, const std::string& run_id,
                                                    const std::vector<BackgroundRecord>& backgrounds) {
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < backgrounds.size(); ++i) rank[backgrounds[i].background_id] = i;
    std::vector<GenerationCandidate> out;
    for (auto& [id, c] : Stage1Log(ws.run_file(run_id, "stage1.jsonl")).latest()) out.push_back(std::move(c));
    std::sort(out.begin(), out.end(), [&](const GenerationCandidate& a, const GenerationCandidate& b) {
        const auto ra = rank.count(a.background_id) ? rank[a.background_id] : rank.size();
        const auto rb = rank.count(b.background_id) ? rank[b.background_id] : rank.size();
        return ra != rb ? ra < rb : a.index < b.index;
    });
    return out;
}

}  // namespace

RunState load_run(const Workspace& ws, const std::string& run_id) {
    RunState r;
    r.backgrounds = load_backgrounds(ws, run_id);
    r.config = read_json_file(ws.run_file(run_id, "config.json")).get<PipelineConfig>();
    r.candidates = ordered_candidates(ws, run_id, r.backgrounds);

    const fs::path s2 = ws.run_file(run_id, "stage2.json");
    const fs::path s3 = ws.run_file(run_id, "stage3.json");
    const fs::path ev = ws.run_file(run_id, "eval.json");
    if (fs::exists(s2)) r.stage2 = read_json_file(s2);
    if (fs::exists(s3)) r.stage3 = read_json_file(s3);
    if (fs::exists(ev)) r.evaluation = read_json_file(ev);

    for (GenerationCandidate& c : r.candidates) {
        if (c.state != CandidateState::stage1_passed) continue;
        if (!r.stage2.is_null() && r.stage2["annotations"].contains(c.candidate_id)) {
            const json& a = r.stage2["annotations"][c.candidate_id];
            AnnotationSummary s;
            s.accept_votes = a.at("accept_votes").get<int>();
            s.reject_votes = a.at("reject_votes").get<int>();
            if (!a.at("resolved").is_null()) s.resolved = parse_label(a["resolved"].get<std::string>());
            s.used_for_training = a.value("used_for_training", false);
            c.annotation = s;
            c.advance(CandidateState::annotated);
        }
        if (!r.stage3.is_null() && r.stage3["decisions"].contains(c.candidate_id)) {
            const json& d = r.stage3["decisions"][c.candidate_id];
            if (!d.at("probability").is_null()) c.classifier_probability = d["probability"].get<double>();
            if (!d.at("reason").is_null()) c.final_reason = d["reason"].get<std::string>();
            c.advance(parse_candidate_state(d.at("state").get<std::string>()));
        }
    }
    return r;
}

std::optional<std::vector<ReviewCandidate>> WorkspaceCatalog::candidates(const std::string& run_id) const {
    if (!ws_.has_run(run_id)) return std::nullopt;
    const auto backgrounds = load_backgrounds(ws_, run_id);
    std::vector<ReviewCandidate> out;
    for (const GenerationCandidate& c : ordered_candidates(ws_, run_id, backgrounds)) {
        ReviewCandidate rc;
        rc.candidate_id = c.candidate_id;
        rc.image_id = c.image_id;
        rc.stage1_passed = c.state == CandidateState::stage1_passed;
        rc.details = {{"background_id", c.background_id},
                      {"mask", c.mask},
                      {"score_card", c.score_card ? json(*c.score_card) : json(nullptr)},
                      {"gate_decision", c.gate_decision ? json(*c.gate_decision) : json(nullptr)},
                      {"b_det", c.score_card && c.score_card->b_det ? json(*c.score_card->b_det) : json(nullptr)}};
        out.push_back(std::move(rc));
    }
    return out;
}

}  // namespace curator
