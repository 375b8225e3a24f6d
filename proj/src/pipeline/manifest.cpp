#include "curator/pipeline/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "curator/annotation.hpp"
#include "curator/errors.hpp"
#include "curator/metrics.hpp"

namespace curator {

using nlohmann::json;

namespace {

bool reached(const GenerationCandidate& c, CandidateState s) {
    return std::find(c.history.begin(), c.history.end(), s) != c.history.end();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string distribution_row(const std::string& name, std::vector<double> v) {
    char buf[160];
    if (v.empty()) {
        std::snprintf(buf, sizeof buf, "  %-24s %6s\n", name.c_str(), "0");
        return buf;
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    std::snprintf(buf, sizeof buf, "  %-24s %6zu %9.4f %9.4f %9.4f %9.4f\n", name.c_str(), n, v.front(), median,
                  mean, v.back());
    return buf;
}

}  // namespace

json tally_statistics(const std::vector<GenerationCandidate>& candidates) {
    std::int64_t passed = 0, failed = 0, incomplete = 0, annotated = 0, accepted = 0, rejected = 0, awaiting = 0,
                 unavailable = 0, accepted_unannotated = 0;
    json gate_failures = json::object();
    for (const char* g : kGateNames) gate_failures[g] = 0;
    for (const GenerationCandidate& c : candidates) {
        passed += reached(c, CandidateState::stage1_passed);
        failed += c.state == CandidateState::stage1_failed;
        incomplete += c.incomplete();
        annotated += reached(c, CandidateState::annotated);
        accepted += c.state == CandidateState::accepted;
        rejected += c.state == CandidateState::rejected;
        awaiting += c.state == CandidateState::stage1_passed || c.state == CandidateState::annotated;
        unavailable += c.final_reason == std::optional<std::string>("features-unavailable");
        accepted_unannotated += c.state == CandidateState::accepted && !c.annotation;
        if (c.gate_decision && c.score_card && c.score_card->complete())
            for (const auto& [gate, outcome] : c.gate_decision->per_gate)
                if (!outcome.passed) gate_failures[gate] = gate_failures[gate].get<std::int64_t>() + 1;
    }
    return {{"generated", candidates.size()},
            {"stage1_passed", passed},
            {"stage1_failed", failed},
            {"incomplete", incomplete},
            {"annotated", annotated},
            {"accepted", accepted},
            {"rejected", rejected},
            {"awaiting_stage3", awaiting},
            {"features_unavailable", unavailable},
            {"accepted_without_annotation", accepted_unannotated},
            {"gate_failures", gate_failures}};
}

json build_manifest(const RunState& run, const json& backend_ids) {
    json stage2 = nullptr;
    if (!run.stage2.is_null()) {
        stage2 = run.stage2;
        stage2.erase("annotations");  // folded into the candidate records
    }
    json candidates = json::array();
    for (const GenerationCandidate& c : run.candidates) candidates.push_back(c);
    const json cfg = run.config;
    return {{"schema_version", kManifestSchemaVersion},
            {"run_id", run.config.run_id},
            {"generated_at", utc_timestamp()},
            {"config", cfg},
            {"backends", backend_ids},
            {"annotation_resolution", to_string(run.config.resolution)},
            {"stage3_threshold", run.stage3.is_null() ? cfg["stage3_threshold"] : run.stage3["threshold"]},
            {"backgrounds", run.backgrounds},
            {"statistics", tally_statistics(run.candidates)},
            {"stage2", stage2},
            {"stage3", run.stage3.is_null()
                           ? json(nullptr)
                           : json{{"threshold", run.stage3["threshold"]}, {"model_file", run.stage3["model_file"]}}},
            {"evaluation", run.evaluation},
            {"candidates", candidates}};
}

json strip_timestamps(const json& j) {
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) {
            if (k.size() >= 3 && k.compare(k.size() - 3, 3, "_at") == 0) continue;
            out[k] = strip_timestamps(v);
        }
        return out;
    }
    if (j.is_array()) {
        json out = json::array();
        for (const json& v : j) out.push_back(strip_timestamps(v));
        return out;
    }
    return j;
}

json load_manifest(const std::filesystem::path& p) {
    const json j = read_json_file(p);
    if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer())
        throw FormatError(p.string() + " is not a run manifest (no integer schema_version)");
    const int v = j["schema_version"].get<int>();
    if (v != kManifestSchemaVersion)
        throw FormatError(p.string() + ": unsupported manifest schema_version " + std::to_string(v) +
                          " (this build reads " + std::to_string(kManifestSchemaVersion) + ")");
    return j;
}

std::vector<GenerationCandidate> manifest_candidates(const json& manifest) {
    std::vector<GenerationCandidate> out;
    for (const json& c : manifest.at("candidates")) out.push_back(c.get<GenerationCandidate>());
    return out;
}

std::string manifest_summary(const json& m) {
    std::ostringstream os;
    const json& s = m.at("statistics");
    os << "run " << m.at("run_id").get<std::string>() << " (manifest schema " << m["schema_version"] << ")\n\n";
    os << "stage counts\n";
    for (const char* k : {"generated", "stage1_passed", "stage1_failed", "incomplete", "annotated", "accepted",
                          "rejected", "awaiting_stage3", "features_unavailable", "accepted_without_annotation"}) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-28s %8lld\n", k, static_cast<long long>(s.at(k).get<std::int64_t>()));
        os << buf;
    }
    os << "\ngate failures among complete score cards\n";
    for (const auto& [gate, n] : s.at("gate_failures").items()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "  %-28s %8lld\n", gate.c_str(), static_cast<long long>(n.get<std::int64_t>()));
        os << buf;
    }

    std::vector<double> det, iou_v, aes, vlm, prob;
    for (const GenerationCandidate& c : manifest_candidates(m)) {
        if (c.score_card && c.score_card->complete()) {
            det.push_back(c.score_card->s_det);
            if (c.score_card->iou_mask) iou_v.push_back(*c.score_card->iou_mask);
            aes.push_back(c.score_card->s_aes);
            vlm.push_back(c.score_card->s_vlm);
        }
        if (c.classifier_probability) prob.push_back(*c.classifier_probability);
    }
    char head[160];
    std::snprintf(head, sizeof head, "\nscore distributions\n  %-24s %6s %9s %9s %9s %9s\n", "score", "n", "min",
                  "median", "mean", "max");
    os << head;
    os << distribution_row("s_det", det) << distribution_row("iou", iou_v) << distribution_row("s_aes", aes)
       << distribution_row("s_vlm", vlm) << distribution_row("classifier_probability", prob);

    os << "\nstage 3 threshold " << fmt(m.at("stage3_threshold").get<double>()) << ", annotation resolution "
       << m.at("annotation_resolution").get<std::string>() << "\n";
    if (const json& e = m["evaluation"]; e.is_object()) {
        const json& x = e.at("metrics");
        ConfusionCounts c{x.at("tp").get<std::int64_t>(), x.at("fp").get<std::int64_t>(),
                          x.at("tn").get<std::int64_t>(), x.at("fn").get<std::int64_t>()};
        os << "\nevaluation (" << e.at("source").get<std::string>() << ")\n" << metrics_table(c);
    }
    return os.str();
}

}  // namespace curator
