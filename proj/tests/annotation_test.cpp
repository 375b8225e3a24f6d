#include <gtest/gtest.h>

#include <fstream>

#include <httplib.h>

#include "curator/annotation.hpp"
#include "curator/errors.hpp"
#include "test_util.hpp"

using namespace curator;
using nlohmann::json;

namespace {

class MemoryCatalog : public CandidateCatalog {
public:
    std::map<std::string, std::vector<ReviewCandidate>> runs;
    std::optional<std::vector<ReviewCandidate>> candidates(const std::string& run_id) const override {
        auto it = runs.find(run_id);
        if (it == runs.end()) return std::nullopt;
        return it->second;
    }
};

class AnnotationTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = test_util::fresh_dir("annotation");
        images_ = std::make_shared<ImageStore>(dir_ / "images");
        catalog_ = std::make_shared<MemoryCatalog>();
        auto& c = catalog_->runs["r1"];
        for (int i = 0; i < 5; ++i) {
            const std::string img = images_->put(test_util::flat_png(8, 8, static_cast<unsigned char>(i)));
            c.push_back({"c" + std::to_string(i), img, i != 3, {{"score_card", {{"s_det", 0.9}}}}});
        }
        restart();
    }

    void restart() {
        int tick = 0;
        service_ = std::make_shared<AnnotationService>(dir_ / "ws", catalog_, images_, [tick]() mutable {
            return "2026-01-01T00:00:" + std::to_string(10 + tick++) + ".000Z";
        });
    }

    std::filesystem::path dir_;
    std::shared_ptr<ImageStore> images_;
    std::shared_ptr<MemoryCatalog> catalog_;
    std::shared_ptr<AnnotationService> service_;
};

std::vector<std::string> ids(const std::vector<ReviewCandidate>& v) {
    std::vector<std::string> out;
    for (const auto& c : v) out.push_back(c.candidate_id);
    return out;
}

}  // namespace

TEST_F(AnnotationTest, QueueIsOldestFirstAndSkipsLabeled) {
    EXPECT_EQ(ids(service_->next_pending("r1", "a", 10)), (std::vector<std::string>{"c0", "c1", "c2", "c4"}));
    EXPECT_EQ(ids(service_->next_pending("r1", "a", 2)), (std::vector<std::string>{"c0", "c1"}));
    service_->submit_label("r1", "c1", Label::accept, "a");
    EXPECT_EQ(ids(service_->next_pending("r1", "a", 10)), (std::vector<std::string>{"c0", "c2", "c4"}));
    EXPECT_EQ(ids(service_->next_pending("r1", "b", 10)).size(), 4u);
    for (const char* c : {"c0", "c2", "c4"}) service_->submit_label("r1", c, Label::reject, "a");
    EXPECT_TRUE(service_->next_pending("r1", "a", 10).empty());
}

TEST_F(AnnotationTest, ErrorsForUnknownAndFailedCandidates) {
    EXPECT_THROW(service_->next_pending("nope", "a", 1), NotFoundError);
    EXPECT_THROW(service_->submit_label("r1", "c9", Label::accept, "a"), NotFoundError);
    EXPECT_THROW(service_->submit_label("r1", "c3", Label::accept, "a"), ConflictError);
    EXPECT_THROW(service_->submit_label("r1", "c0", Label::accept, ""), ValidationError);
    EXPECT_THROW(service_->export_labels("r1", Resolution::majority), EmptyExportError);
}

TEST_F(AnnotationTest, ProgressCountsPerAnnotatorAndOverall) {
    QueueState q = service_->progress("r1", std::string("a"));
    EXPECT_EQ(q.total, 4);
    EXPECT_EQ(q.pending, 4);
    service_->submit_label("r1", "c0", Label::accept, "a");
    q = service_->progress("r1", std::string("a"));
    EXPECT_EQ(q.pending, 3);
    EXPECT_EQ(q.labeled, 1);
    // Relabeling does not move the counter again.
    service_->submit_label("r1", "c0", Label::reject, "a");
    EXPECT_EQ(service_->progress("r1", std::string("a")).pending, 3);
    EXPECT_EQ(service_->progress("r1", std::string("b")).pending, 4);
    service_->submit_label("r1", "c1", Label::accept, "b");
    q = service_->progress("r1", std::nullopt);
    EXPECT_EQ(q.labeled, 2);
    EXPECT_EQ(q.pending + q.labeled, q.total);
}

TEST_F(AnnotationTest, LastWriteWinsPerAnnotator) {
    service_->submit_label("r1", "c0", Label::accept, "a");
    service_->submit_label("r1", "c0", Label::reject, "a");
    const LabelExport e = service_->export_labels("r1", Resolution::any);
    ASSERT_EQ(e.examples.size(), 1u);
    EXPECT_EQ(e.examples[0].label, Label::reject);
    service_->submit_label("r1", "c0", Label::accept, "b");
    EXPECT_EQ(service_->export_labels("r1", Resolution::any).examples.size(), 2u);
}

TEST_F(AnnotationTest, MajorityExportAndTies) {
    const char* votes[5] = {"accept", "accept", "reject", "accept", "reject"};
    for (int i = 0; i < 5; ++i)
        service_->submit_label("r1", "c0", parse_label(votes[i]), "ann-" + std::to_string(i));
    service_->submit_label("r1", "c1", Label::accept, "ann-0");
    service_->submit_label("r1", "c1", Label::reject, "ann-1");
    const LabelExport e = service_->export_labels("r1", Resolution::majority);
    ASSERT_EQ(e.examples.size(), 1u);
    EXPECT_EQ(e.examples[0].candidate_id, "c0");
    EXPECT_EQ(e.examples[0].label, Label::accept);
    EXPECT_EQ(e.examples[0].accept_votes, 3);
    EXPECT_EQ(e.examples[0].reject_votes, 2);
    EXPECT_EQ(e.examples[0].image_id, catalog_->runs["r1"][0].image_id);
    EXPECT_EQ(e.ties, (std::vector<std::string>{"c1"}));
    EXPECT_EQ(service_->export_labels("r1", Resolution::any).examples.size(), 7u);
}

TEST_F(AnnotationTest, AcknowledgedLabelsSurviveRestart) {
    std::vector<AnnotationRecord> acked;
    acked.push_back(service_->submit_label("r1", "c0", Label::accept, "a"));
    acked.push_back(service_->submit_label("r1", "c2", Label::reject, "a"));
    acked.push_back(service_->submit_label("r1", "c2", Label::accept, "b"));
    const LabelExport before = service_->export_labels("r1", Resolution::any);
    service_.reset();
    restart();
    EXPECT_EQ(service_->export_labels("r1", Resolution::any), before);
    const LabelStore store(AnnotationService::label_log_path(dir_ / "ws", "r1"));
    EXPECT_EQ(store.log(), acked);
}

TEST_F(AnnotationTest, TornFinalLineIsDropped) {
    service_->submit_label("r1", "c0", Label::accept, "a");
    service_.reset();
    const auto log = AnnotationService::label_log_path(dir_ / "ws", "r1");
    {
        std::ofstream out(log, std::ios::app);
        out << R"({"seq": 2, "candidate_id": "c1", "annot)";
    }
    restart();
    const LabelStore reopened(log);
    EXPECT_EQ(reopened.log().size(), 1u);
    // The next append continues cleanly after the good prefix.
    service_->submit_label("r1", "c1", Label::reject, "a");
    EXPECT_EQ(LabelStore(log).log().size(), 2u);
}

TEST_F(AnnotationTest, CorruptMiddleLineIsAnError) {
    const auto log = AnnotationService::label_log_path(dir_ / "ws", "r1");
    std::filesystem::create_directories(log.parent_path());
    std::ofstream(log) << "not json\n";
    EXPECT_THROW(LabelStore{log}, FormatError);
}

TEST_F(AnnotationTest, HttpApiRoundTrip) {
    AnnotationServer server(service_, {"http://localhost:5173"});
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);

    auto res = cli.Get("/api/v1/runs/r1/queue?annotator=a&count=2");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
    json q = json::parse(res->body);
    ASSERT_EQ(q["items"].size(), 2u);
    EXPECT_EQ(q["items"][0]["candidate_id"], "c0");
    EXPECT_EQ(q["items"][0]["score_card"]["s_det"], 0.9);
    EXPECT_EQ(q["total"], 4);

    const std::string image_url = q["items"][0]["image_url"];
    res = cli.Get(image_url);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->get_header_value("Content-Type"), "image/png");
    EXPECT_EQ(Bytes(res->body.begin(), res->body.end()), images_->read(catalog_->runs["r1"][0].image_id));

    res = cli.Post("/api/v1/runs/r1/labels", R"({"candidate_id":"c0","label":"accept","annotator_id":"a"})",
                   "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 201);
    EXPECT_EQ(json::parse(res->body)["seq"], 1);

    res = cli.Post("/api/v1/runs/r1/labels", R"({"candidate_id":"c3","label":"accept","annotator_id":"a"})",
                   "application/json");
    EXPECT_EQ(res->status, 409);
    res = cli.Post("/api/v1/runs/r1/labels", R"({"candidate_id":"c0","label":"maybe","annotator_id":"a"})",
                   "application/json");
    EXPECT_EQ(res->status, 400);
    res = cli.Post("/api/v1/runs/r1/labels", "{", "application/json");
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(cli.Get("/api/v1/runs/zz/progress")->status, 404);
    EXPECT_EQ(cli.Get("/api/v1/runs/r1/queue")->status, 400);
    EXPECT_EQ(cli.Get("/api/v1/images/0123456789abcdef")->status, 404);

    res = cli.Get("/api/v1/runs/r1/progress?annotator=a");
    EXPECT_EQ(json::parse(res->body), (json{{"pending", 3}, {"labeled", 1}, {"total", 4}}));

    res = cli.Get("/api/v1/runs/r1/export?resolution=majority");
    const json e = json::parse(res->body);
    EXPECT_EQ(e["resolution"], "majority");
    ASSERT_EQ(e["examples"].size(), 1u);
    EXPECT_EQ(e["examples"][0]["label"], "accept");
    EXPECT_EQ(cli.Get("/api/v1/runs/r1/export?resolution=best")->status, 400);

    res = cli.Options("/api/v1/runs/r1/labels");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 204);
    EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
    server.stop();
}

TEST_F(AnnotationTest, EmptyExportOverHttpIsConflict) {
    AnnotationServer server(service_);
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Get("/api/v1/runs/r1/export");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 409);
    EXPECT_EQ(json::parse(res->body)["kind"], "empty-export");
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}
