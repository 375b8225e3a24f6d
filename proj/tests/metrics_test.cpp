#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "curator/embedding.hpp"
#include "curator/errors.hpp"
#include "curator/metrics.hpp"

using namespace curator;

namespace {
constexpr Label A = Label::accept;
constexpr Label R = Label::reject;
}  // namespace

TEST(Confusion, CountsEachCell) {
    const std::vector<Label> preds{A, A, R, R, A};
    const std::vector<Label> labels{A, R, R, A, A};
    EXPECT_EQ(confusion(preds, labels), (ConfusionCounts{2, 1, 1, 1}));
}

TEST(Confusion, RejectsMismatchAndEmpty) {
    const std::vector<Label> one{A};
    const std::vector<Label> two{A, R};
    EXPECT_THROW(confusion(one, two), ValidationError);
    EXPECT_THROW(confusion({}, {}), ValidationError);
}

TEST(PrecisionRecallF1, WorkedExample) {
    const auto m = precision_recall_f1({3, 1, 0, 2});
    EXPECT_DOUBLE_EQ(m.precision, 0.75);
    EXPECT_DOUBLE_EQ(m.recall, 0.6);
    EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-12);
}

TEST(PrecisionRecallF1, ZeroDenominatorsGiveZero) {
    const auto none_predicted = precision_recall_f1({0, 0, 5, 3});
    EXPECT_EQ(none_predicted.precision, 0.0);
    EXPECT_EQ(none_predicted.recall, 0.0);
    EXPECT_EQ(none_predicted.f1, 0.0);
    EXPECT_EQ(f1_from(0.0, 0.0), 0.0);
}

TEST(PrecisionRecallF1, ReproducesPublishedBackboneTable) {
    struct Row {
        double p, r, f1;
    };
    for (const Row& row : {Row{0.7733, 0.8940, 0.8293}, Row{0.7492, 0.9152, 0.8239},
                           Row{0.7575, 0.9210, 0.8313}, Row{0.7822, 0.9133, 0.8427}}) {
        EXPECT_NEAR(f1_from(row.p, row.r), row.f1, 1e-4) << row.p << " " << row.r;
    }
}

TEST(PrecisionRecallF1, BoundedAndSymmetricProperty) {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> n(0, 40);
    for (int i = 0; i < 500; ++i) {
        const ConfusionCounts c{n(rng), n(rng), n(rng), n(rng)};
        const auto m = precision_recall_f1(c);
        EXPECT_GE(m.f1, 0.0);
        EXPECT_LE(m.f1, 1.0);
        EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
        EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-15);
        EXPECT_DOUBLE_EQ(f1_from(m.precision, m.recall), f1_from(m.recall, m.precision));
    }
}

TEST(Labels, ParseRoundTrip) {
    EXPECT_EQ(parse_label(to_string(A)), A);
    EXPECT_EQ(parse_label("reject"), R);
    EXPECT_THROW(parse_label("maybe"), ValidationError);
}

TEST(MetricsReport, JsonAndTableCarryCounts) {
    const ConfusionCounts c{3, 1, 4, 2};
    const auto j = metrics_json(c);
    EXPECT_EQ(j.at("tp"), 3);
    EXPECT_EQ(j.at("fn"), 2);
    EXPECT_NEAR(j.at("f1").get<double>(), 2.0 / 3.0, 1e-12);
    EXPECT_NE(metrics_table(c).find("0.6667"), std::string::npos);
}

TEST(Cosine, BasicValues) {
    const EmbeddingVector u({1, 0});
    EXPECT_DOUBLE_EQ(cosine_similarity(u, u), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(u, EmbeddingVector({0, 3})), 0.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(u, EmbeddingVector({-2, 0})), -1.0);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine_similarity(EmbeddingVector({1, 2}), EmbeddingVector({1, 2, 3})), ValidationError);
    EXPECT_THROW(cosine_similarity(EmbeddingVector({0, 0}), EmbeddingVector({1, 2})), DomainError);
    EXPECT_THROW(EmbeddingVector(std::vector<double>{}), ValidationError);
    EXPECT_THROW(EmbeddingVector({1.0, std::nan("")}), ValidationError);
}

TEST(Cosine, ScaleInvariantAndClamped) {
    std::mt19937 rng(5);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scale(1e-150, 1e150);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> a(16), b(16);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        const double c = cosine_similarity(EmbeddingVector(a), EmbeddingVector(b));
        EXPECT_GE(c, -1.0);
        EXPECT_LE(c, 1.0);
        const double s = scale(rng);
        std::vector<double> as = a;
        for (auto& v : as) v *= s;
        EXPECT_NEAR(cosine_similarity(EmbeddingVector(as), EmbeddingVector(b)), c, 1e-12);
        EXPECT_LE(cosine_similarity(EmbeddingVector(a), EmbeddingVector(a)), 1.0);
    }
}

TEST(L2Norm, AvoidsOverflowAndUnderflow) {
    EXPECT_DOUBLE_EQ(l2_norm(std::vector<double>{3e200, 4e200}), 5e200);
    EXPECT_DOUBLE_EQ(l2_norm(std::vector<double>{3e-200, 4e-200}), 5e-200);
}
