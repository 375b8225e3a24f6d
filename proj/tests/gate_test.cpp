#include <gtest/gtest.h>

#include <memory>
#include <stdexcept>

#include "curator/errors.hpp"
#include "curator/gate.hpp"

using namespace curator;

namespace {

ScoreCard passing_card() {
    ScoreCard c;
    c.s_det = 0.95;
    c.b_det = Box{10, 10, 60, 60};
    c.detection_count = 1;
    c.iou_mask = 0.9;
    c.s_aes = 6.0;
    c.caption = "a dog";
    c.s_vlm = 0.9;
    return c;
}

}  // namespace

TEST(Gates, TruthTablePassesOnlyWhenAllGatesPass) {
    const GateThresholds t;
    for (int mask = 0; mask < 16; ++mask) {
        ScoreCard c = passing_card();
        if (mask & 1) c.s_det = 0.5;
        if (mask & 2) c.iou_mask = 0.5;
        if (mask & 4) c.s_aes = 4.0;
        if (mask & 8) c.s_vlm = 0.5;
        const GateDecision d = apply_gates(c, t);
        EXPECT_EQ(d.passed, mask == 0) << mask;
        EXPECT_EQ(d.per_gate.at("s_det").passed, !(mask & 1));
        EXPECT_EQ(d.per_gate.at("iou").passed, !(mask & 2));
        EXPECT_EQ(d.per_gate.at("s_aes").passed, !(mask & 4));
        EXPECT_EQ(d.per_gate.at("s_vlm").passed, !(mask & 8));
        EXPECT_EQ(d.failure_reasons.size(), static_cast<std::size_t>(__builtin_popcount(mask)));
        EXPECT_EQ(d.per_gate.size(), 4u);
    }
}

TEST(Gates, BoundaryValuesFail) {
    const GateThresholds t;
    ScoreCard c = passing_card();
    c.s_det = 0.8;
    EXPECT_FALSE(apply_gates(c, t).passed);
    c = passing_card();
    c.s_aes = 5.0;
    EXPECT_FALSE(apply_gates(c, t).passed);
    c = passing_card();
    c.iou_mask = 0.8;
    EXPECT_FALSE(apply_gates(c, t).passed);
    c = passing_card();
    c.s_vlm = 0.8;
    EXPECT_FALSE(apply_gates(c, t).passed);
}

TEST(Gates, SlightlyAboveBoundaryPasses) {
    ScoreCard c;
    c.s_det = 0.81;
    c.b_det = Box{0, 0, 1, 1};
    c.iou_mask = 0.81;
    c.s_aes = 5.01;
    c.s_vlm = 0.81;
    EXPECT_TRUE(apply_gates(c, {}).passed);
}

TEST(Gates, NoDetectionFailsAndSkipsDependentGates) {
    ScoreCard c = passing_card();
    c.s_det = 0.0;
    c.b_det.reset();
    c.iou_mask.reset();
    c.detection_count = 0;
    const GateDecision d = apply_gates(c, {});
    EXPECT_FALSE(d.passed);
    EXPECT_FALSE(d.per_gate.at("s_det").skipped);
    EXPECT_TRUE(d.per_gate.at("iou").skipped);
    EXPECT_FALSE(d.per_gate.at("iou").value.has_value());
    EXPECT_TRUE(d.per_gate.at("s_aes").skipped);
    EXPECT_EQ(d.per_gate.at("s_aes").value, 6.0);
}

TEST(Gates, IncompleteCardFailsWithComponent) {
    ScoreCard c = passing_card();
    c.incomplete_component = "captioner";
    const GateDecision d = apply_gates(c, {});
    EXPECT_FALSE(d.passed);
    ASSERT_EQ(d.failure_reasons.size(), 1u);
    EXPECT_EQ(d.failure_reasons[0], "incomplete: captioner");
    for (const char* g : kGateNames) EXPECT_TRUE(d.per_gate.at(g).skipped);
}

TEST(Gates, RaisingAnyThresholdNeverAddsPasses) {
    const ScoreCard c = passing_card();
    GateThresholds t;
    bool prev = apply_gates(c, t).passed;
    for (int i = 0; i < 50; ++i) {
        t.min_s_det += 0.005;
        t.min_s_aes += 0.05;
        const bool now = apply_gates(c, t).passed;
        EXPECT_TRUE(prev || !now);
        prev = now;
    }
    EXPECT_FALSE(prev);
}

TEST(Gates, JsonRoundTrip) {
    const ScoreCard c = passing_card();
    EXPECT_EQ(nlohmann::json(c).get<ScoreCard>(), c);
    const GateDecision d = apply_gates(c, {});
    EXPECT_EQ(nlohmann::json(d).get<GateDecision>(), d);
    const GateThresholds t{0.7, 4.5, 0.6, 0.75};
    EXPECT_EQ(nlohmann::json(t).get<GateThresholds>(), t);
}

namespace {

struct FixedDetector : Detector {
    std::vector<Detection> out;
    std::string id() const override { return "fixed"; }
    std::vector<Detection> detect(const std::string&, const std::string&) const override { return out; }
};
struct FixedAes : AestheticScorer {
    std::string id() const override { return "fixed"; }
    double score(const std::string&) const override { return 6.5; }
};
struct ThrowingCaptioner : Captioner {
    std::string id() const override { return "throwing"; }
    std::string caption(const std::string&, const std::string&) const override {
        throw TransportError("connection refused", 3);
    }
};
struct EchoCaptioner : Captioner {
    std::string id() const override { return "echo"; }
    std::string caption(const std::string&, const std::string& p) const override { return p; }
};
struct UnitEmbedder : TextEmbedder {
    std::string id() const override { return "unit"; }
    EmbeddingVector embed(const std::string& t) const override {
        return EmbeddingVector({1.0, static_cast<double>(t.size() % 3)});
    }
};

Backends stub_backends(std::vector<Detection> dets, bool caption_fails) {
    auto det = std::make_shared<FixedDetector>();
    det->out = std::move(dets);
    Backends b;
    b.detector = det;
    b.aesthetic = std::make_shared<FixedAes>();
    if (caption_fails)
        b.captioner = std::make_shared<ThrowingCaptioner>();
    else
        b.captioner = std::make_shared<EchoCaptioner>();
    b.embedder = std::make_shared<UnitEmbedder>();
    return b;
}

}  // namespace

TEST(ScoreCandidate, UsesBestDetectionAndComputesIou) {
    const Box mask{0, 0, 10, 10};
    const Backends b = stub_backends({{"dog", 0.9, {0, 0, 10, 5}}, {"dog", 0.6, mask}}, false);
    const ScoreCard c = score_candidate(b, "img", "dog", "a dog", mask);
    ASSERT_TRUE(c.complete());
    EXPECT_EQ(c.s_det, 0.9);
    EXPECT_EQ(c.detection_count, 2);
    EXPECT_DOUBLE_EQ(*c.iou_mask, 0.5);
    EXPECT_EQ(c.s_aes, 6.5);
    EXPECT_DOUBLE_EQ(c.s_vlm, 1.0);
    EXPECT_EQ(c.backend_ids.at("detector"), "fixed");
}

TEST(ScoreCandidate, BackendFailureMarksIncomplete) {
    const Backends b = stub_backends({{"dog", 0.9, {0, 0, 10, 10}}}, true);
    const ScoreCard c = score_candidate(b, "img", "dog", "a dog", {0, 0, 10, 10});
    EXPECT_FALSE(c.complete());
    EXPECT_EQ(*c.incomplete_component, "captioner");
    EXPECT_NE(c.error.find("connection refused"), std::string::npos);
    EXPECT_FALSE(apply_gates(c, {}).passed);
}
