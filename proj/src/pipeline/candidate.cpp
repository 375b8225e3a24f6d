#include "curator/pipeline/candidate.hpp"

#include <cstdio>

#include "curator/errors.hpp"
#include "curator/json_io.hpp"

namespace curator {

using nlohmann::json;

namespace {
constexpr const char* kStateNames[] = {"generated", "stage1_failed", "stage1_passed",
                                       "annotated", "accepted",      "rejected"};
}

std::string to_string(CandidateState s) { return kStateNames[static_cast<int>(s)]; }

CandidateState parse_candidate_state(const std::string& s) {
    for (int i = 0; i < 6; ++i)
        if (s == kStateNames[i]) return static_cast<CandidateState>(i);
    throw FormatError("unknown candidate state '" + s + "'");
}

bool transition_allowed(CandidateState from, CandidateState to) {
    using S = CandidateState;
    switch (from) {
        case S::generated: return to == S::stage1_failed || to == S::stage1_passed;
        case S::stage1_passed: return to == S::annotated || to == S::accepted || to == S::rejected;
        case S::annotated: return to == S::accepted || to == S::rejected;
        case S::stage1_failed:
        case S::accepted:
        case S::rejected: return false;
    }
    return false;
}

void GenerationCandidate::advance(CandidateState next) {
    if (!transition_allowed(state, next))
        throw DomainError("candidate " + candidate_id + ": illegal transition " + to_string(state) + " -> " +
                          to_string(next));
    state = next;
    history.push_back(next);
}

std::string make_candidate_id(const std::string& background_id, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", index);
    return background_id + "-" + buf;
}

void to_json(json& j, const GenerationCandidate& c) {
    json history = json::array();
    for (CandidateState s : c.history) history.push_back(to_string(s));
    j = {{"candidate_id", c.candidate_id},
         {"background_id", c.background_id},
         {"index", c.index},
         {"seed", c.seed},
         {"mask", c.mask},
         {"image_id", c.image_id},
         {"score_card", c.score_card ? json(*c.score_card) : json(nullptr)},
         {"gate_decision", c.gate_decision ? json(*c.gate_decision) : json(nullptr)},
         {"annotation", nullptr},
         {"classifier_probability", c.classifier_probability ? json(*c.classifier_probability) : json(nullptr)},
         {"final_reason", c.final_reason ? json(*c.final_reason) : json(nullptr)},
         {"state", to_string(c.state)},
         {"state_history", history}};
    if (c.annotation) {
        const AnnotationSummary& a = *c.annotation;
        j["annotation"] = {{"accept_votes", a.accept_votes},
                           {"reject_votes", a.reject_votes},
                           {"resolved", a.resolved ? json(to_string(*a.resolved)) : json(nullptr)},
                           {"used_for_training", a.used_for_training}};
    }
}

void from_json(const json& j, GenerationCandidate& c) {
    c = GenerationCandidate{};
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.background_id = j.at("background_id").get<std::string>();
    c.index = j.at("index").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.mask = j.at("mask").get<Box>();
    c.image_id = j.value("image_id", std::string());
    if (j.contains("score_card") && !j["score_card"].is_null()) c.score_card = j["score_card"].get<ScoreCard>();
    if (j.contains("gate_decision") && !j["gate_decision"].is_null())
        c.gate_decision = j["gate_decision"].get<GateDecision>();
    if (j.contains("annotation") && !j["annotation"].is_null()) {
        const json& a = j["annotation"];
        AnnotationSummary s;
        s.accept_votes = a.at("accept_votes").get<int>();
        s.reject_votes = a.at("reject_votes").get<int>();
        if (!a.at("resolved").is_null()) s.resolved = parse_label(a["resolved"].get<std::string>());
        s.used_for_training = a.value("used_for_training", false);
        c.annotation = s;
    }
    if (j.contains("classifier_probability") && !j["classifier_probability"].is_null())
        c.classifier_probability = j["classifier_probability"].get<double>();
    if (j.contains("final_reason") && !j["final_reason"].is_null())
        c.final_reason = j["final_reason"].get<std::string>();

    // Replay the history so a hand-edited or corrupted record cannot smuggle
    // in a backward transition.
    const json& h = j.at("state_history");
    if (!h.is_array() || h.empty() || h[0].get<std::string>() != "generated")
        throw FormatError("candidate " + c.candidate_id + ": history must start at 'generated'");
    for (std::size_t i = 1; i < h.size(); ++i) {
        try {
            c.advance(parse_candidate_state(h[i].get<std::string>()));
        } catch (const DomainError& e) {
            throw FormatError(e.what());
        }
    }
    if (to_string(c.state) != j.at("state").get<std::string>())
        throw FormatError("candidate " + c.candidate_id + ": state does not match its history");
}

}  // namespace curator
