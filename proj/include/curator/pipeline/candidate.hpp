#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/gate.hpp"
#include "curator/geometry.hpp"
#include "curator/metrics.hpp"

namespace curator {

/// generated -> stage1_failed | stage1_passed
/// stage1_passed -> annotated | accepted | rejected
/// annotated -> accepted | rejected
enum class CandidateState { generated, stage1_failed, stage1_passed, annotated, accepted, rejected };

std::string to_string(CandidateState s);
CandidateState parse_candidate_state(const std::string& s);
bool transition_allowed(CandidateState from, CandidateState to);

struct AnnotationSummary {
    int accept_votes = 0;
    int reject_votes = 0;
    std::optional<Label> resolved;  // empty for ties
    bool used_for_training = false;

    friend bool operator==(const AnnotationSummary&, const AnnotationSummary&) = default;
};

struct GenerationCandidate {
    std::string candidate_id;
    std::string background_id;
    int index = 0;
    std::uint64_t seed = 0;
    Box mask;
    std::string image_id;  // empty when inpainting failed
    std::optional<ScoreCard> score_card;
    std::optional<GateDecision> gate_decision;
    std::optional<AnnotationSummary> annotation;
    std::optional<double> classifier_probability;
    std::optional<std::string> final_reason;
    CandidateState state = CandidateState::generated;
    std::vector<CandidateState> history{CandidateState::generated};

    /// Moves to `next`; throws DomainError on a backward or skipping transition.
    void advance(CandidateState next);
    bool incomplete() const { return score_card && !score_card->complete(); }

    friend bool operator==(const GenerationCandidate&, const GenerationCandidate&) = default;
};

/// "<background_id>-<index, 4 digits>"
std::string make_candidate_id(const std::string& background_id, int index);

void to_json(nlohmann::json& j, const GenerationCandidate& c);
/// Validates the recorded history against the state machine.
void from_json(const nlohmann::json& j, GenerationCandidate& c);

}  // namespace curator
