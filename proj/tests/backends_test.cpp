#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>

#include "curator/errors.hpp"
#include "curator/gate.hpp"
#include "curator/hashing.hpp"
#include "curator/http_backends.hpp"
#include "curator/image_store.hpp"
#include "curator/json_io.hpp"
#include "curator/mock_backends.hpp"
#include "test_util.hpp"

using namespace curator;
using nlohmann::json;

namespace {

class BackendsTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = test_util::fresh_dir("backends");
        store_ = std::make_shared<ImageStore>(dir_ / "images");
        bg_ = store_->put(test_util::flat_png(640, 480, 40), {{"source", "background"}});
    }

    std::filesystem::path dir_;
    std::shared_ptr<ImageStore> store_;
    std::string bg_;
};

}  // namespace

TEST_F(BackendsTest, HashMocksAreDeterministic) {
    const Backends a = make_backends({}, store_);
    const Backends b = make_backends({}, store_);
    const Box mask{100, 100, 300, 300};
    const std::string img = a.inpainter->inpaint(bg_, "a dog in an elevator", mask, 7);
    EXPECT_EQ(img, b.inpainter->inpaint(bg_, "a dog in an elevator", mask, 7));
    EXPECT_NE(img, a.inpainter->inpaint(bg_, "a dog in an elevator", mask, 8));
    EXPECT_EQ(store_->dims(img), (ImageDims{640, 480}));
    EXPECT_EQ(a.detector->detect(img, "dog"), b.detector->detect(img, "dog"));
    EXPECT_EQ(a.aesthetic->score(img), b.aesthetic->score(img));
    EXPECT_EQ(a.captioner->caption(img, "p"), b.captioner->caption(img, "p"));
    EXPECT_EQ(a.embedder->embed("a dog"), b.embedder->embed("a dog"));
    EXPECT_EQ(a.features->extract(img, mask), b.features->extract(img, mask));
}

TEST_F(BackendsTest, HashSeedChangesOutputs) {
    BackendsConfig other;
    other.fallback.seed = 99;
    const Backends a = make_backends({}, store_);
    const Backends b = make_backends(other, store_);
    EXPECT_NE(a.aesthetic->score(bg_), b.aesthetic->score(bg_));
    EXPECT_NE(a.embedder->embed("a dog"), b.embedder->embed("a dog"));
}

TEST_F(BackendsTest, HashFeatureDimsAndCropValidation) {
    const Backends b = make_backends({}, store_);
    const FeatureBundle f = b.features->extract(bg_, {0, 0, 640, 480});
    EXPECT_EQ(f.global_features.dim(), 768u);
    EXPECT_EQ(f.spatial_features.dim(), 1024u);
    EXPECT_THROW(b.features->extract(bg_, {-1, 0, 10, 10}), ValidationError);
    EXPECT_THROW(b.features->extract(bg_, {0, 0, 641, 10}), ValidationError);
    EXPECT_THROW(b.inpainter->inpaint(bg_, "a dog", {600, 400, 700, 500}, 1), ValidationError);
}

TEST_F(BackendsTest, HashDetectorFindsPaintedObjectMostOfTheTime) {
    const Backends b = make_backends({}, store_);
    const Box mask{200, 100, 400, 300};
    int found = 0;
    double iou_sum = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const std::string img = b.inpainter->inpaint(bg_, "a dog in an elevator", mask, s);
        const auto dets = b.detector->detect(img, "dog");
        if (!dets.empty()) {
            ++found;
            iou_sum += iou(dets.front().box, mask);
            for (std::size_t i = 1; i < dets.size(); ++i)
                EXPECT_GE(dets[i - 1].confidence, dets[i].confidence);
        }
        EXPECT_TRUE(b.detector->detect(img, "cat").empty());
    }
    EXPECT_GT(found, 160);
    EXPECT_GT(iou_sum / found, 0.7);
    EXPECT_TRUE(b.detector->detect(bg_, "dog").empty());
}

TEST_F(BackendsTest, HashEmbedderRelatesOverlappingTexts) {
    const Backends b = make_backends({}, store_);
    const auto p = b.embedder->embed("a dog in an elevator");
    EXPECT_GT(cosine_similarity(p, b.embedder->embed("a photo of a dog in an elevator")), 0.8);
    EXPECT_LT(cosine_similarity(p, b.embedder->embed("an empty hallway under fluorescent light")), 0.6);
    EXPECT_EQ(p.dim(), 64u);
    EXPECT_THROW(b.embedder->embed("   "), ValidationError);
}

TEST_F(BackendsTest, ScriptedMocksReplayAndMiss) {
    const std::string img = store_->put(test_util::flat_png(64, 48, 9));
    const json doc = {
        {"inpaint", {{bg_ + "|5", img}}},
        {"detect", {{img + "|dog", json::array({{{"label", "dog"}, {"confidence", 0.7}, {"box", {1, 1, 5, 5}}},
                                               {{"label", "dog"}, {"confidence", 0.9}, {"box", {0, 0, 8, 8}}},
                                               {{"label", "cat"}, {"confidence", 0.99}, {"box", {0, 0, 2, 2}}}})}}},
        {"aesthetic", {{img, 6.25}}},
        {"caption", {{img, "a dog"}, {bg_, "  "}}},
        {"embed", {{"a dog", {1.0, 0.0}}}},
        {"features", {{img, {{"global", {1, 2}}, {"spatial", {3}}}}}}};
    const std::filesystem::path fx_path = dir_ / "fixture.json";
    write_text_atomic(fx_path, doc.dump());

    BackendsConfig cfg;
    cfg.fallback.kind = "mock-scripted";
    cfg.fallback.fixture = fx_path.string();
    const Backends b = make_backends(cfg, store_);

    EXPECT_EQ(b.inpainter->inpaint(bg_, "x", {0, 0, 10, 10}, 5), img);
    EXPECT_THROW(b.inpainter->inpaint(bg_, "x", {0, 0, 10, 10}, 6), FixtureMissError);
    const auto dets = b.detector->detect(img, "dog");
    ASSERT_EQ(dets.size(), 2u);
    EXPECT_EQ(dets[0].confidence, 0.9);
    EXPECT_EQ(b.aesthetic->score(img), 6.25);
    EXPECT_THROW(b.aesthetic->score(bg_), FixtureMissError);
    EXPECT_EQ(b.captioner->caption(img, "p"), "a dog");
    EXPECT_THROW(b.captioner->caption(bg_, "p"), ApplicationError);
    EXPECT_EQ(b.embedder->embed("a dog").dim(), 2u);
    EXPECT_THROW(b.embedder->embed("a cat"), FixtureMissError);
    EXPECT_EQ(b.features->extract(img, {0, 0, 64, 48}).spatial_features.dim(), 1u);
    EXPECT_THROW(b.features->extract(img, {0, 0, 65, 48}), ValidationError);
}

TEST_F(BackendsTest, PerServiceOverridesAndUnknownKinds) {
    const json cfg_json = {{"kind", "mock-hash"},
                           {"seed", 3},
                           {"services", {{"embedder", {{"embed_dim", 16}}}}}};
    const auto cfg = cfg_json.get<BackendsConfig>();
    const Backends b = make_backends(cfg, store_);
    EXPECT_EQ(b.embedder->embed("a dog").dim(), 16u);
    EXPECT_EQ(cfg.spec_for("embedder").seed, 3u);

    BackendsConfig bad;
    bad.fallback.kind = "grpc";
    EXPECT_THROW(make_backends(bad, store_), ConfigError);
    const auto typo = json{{"services", {{"painter", json::object()}}}}.get<BackendsConfig>();
    EXPECT_THROW(make_backends(typo, store_), ConfigError);
}

TEST_F(BackendsTest, HttpRoundTripMatchesLocalMocks) {
    const Backends local = make_backends({}, store_);
    ModelServer server(local);
    const int port = server.start();
    BackendEndpoint ep;
    ep.base_url = "http://127.0.0.1:" + std::to_string(port);
    ep.timeout_seconds = 5;
    const Backends remote = make_http_backends(ep, store_);

    const Box mask{100, 100, 300, 300};
    const std::string img = remote.inpainter->inpaint(bg_, "a dog in an elevator", mask, 11);
    EXPECT_EQ(img, local.inpainter->inpaint(bg_, "a dog in an elevator", mask, 11));
    EXPECT_EQ(remote.detector->detect(img, "dog"), local.detector->detect(img, "dog"));
    EXPECT_EQ(remote.aesthetic->score(img), local.aesthetic->score(img));
    EXPECT_EQ(remote.captioner->caption(img, "a dog"), local.captioner->caption(img, "a dog"));
    EXPECT_EQ(remote.embedder->embed("a dog"), local.embedder->embed("a dog"));
    const FeatureBundle rf = remote.features->extract(img, mask);
    const FeatureBundle lf = local.features->extract(img, mask);
    EXPECT_EQ(rf.global_features, lf.global_features);
    EXPECT_EQ(rf.spatial_features, lf.spatial_features);

    // Validation failures on the server come back as 4xx and are not retried.
    const long before = server.hits("/v1/features");
    EXPECT_THROW(make_http_features(std::make_shared<HttpClient>(ep), nullptr)->extract(img, {0, 0, 9999, 10}),
                 ApplicationError);
    EXPECT_EQ(server.hits("/v1/features"), before + 1);
    server.stop();
}

TEST(HttpClient, RetriesServerErrorsThenFails) {
    httplib::Server srv;
    std::atomic<int> calls{0};
    srv.Post("/v1/aesthetic", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    BackendEndpoint ep{"http://127.0.0.1:" + std::to_string(port), 2.0, 2};
    auto scorer = make_http_aesthetic(std::make_shared<HttpClient>(ep));
    try {
        scorer->score("0123456789abcdef");
        ADD_FAILURE() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    EXPECT_EQ(calls.load(), 3);
    srv.stop();
    t.join();
}

TEST(HttpClient, RecoversAfterTransientFailure) {
    httplib::Server srv;
    std::atomic<int> calls{0};
    srv.Post("/v1/aesthetic", [&](const httplib::Request&, httplib::Response& res) {
        if (++calls == 1) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"score": 6.5})", "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    BackendEndpoint ep{"http://127.0.0.1:" + std::to_string(port), 2.0, 2};
    EXPECT_EQ(make_http_aesthetic(std::make_shared<HttpClient>(ep))->score("x"), 6.5);
    EXPECT_EQ(calls.load(), 2);
    srv.stop();
    t.join();
}

TEST(HttpClient, ClientErrorsAreNotRetried) {
    httplib::Server srv;
    std::atomic<int> calls{0};
    srv.Post("/v1/caption", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 422;
        res.set_content(R"({"error": "empty caption"})", "application/json");
    });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    BackendEndpoint ep{"http://127.0.0.1:" + std::to_string(port), 2.0, 2};
    EXPECT_THROW(make_http_captioner(std::make_shared<HttpClient>(ep))->caption("x", "p"), ApplicationError);
    EXPECT_EQ(calls.load(), 1);
    srv.stop();
    t.join();
}

TEST(HttpClient, UnreachableHostIsTransportError) {
    // Bind then close to get a port that refuses connections.
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    BackendEndpoint ep{"http://127.0.0.1:" + std::to_string(port), 1.0, 1};
    try {
        make_http_embedder(std::make_shared<HttpClient>(ep))->embed("a dog");
        ADD_FAILURE() << "expected TransportError";
    } catch (const TransportError& e) {
        EXPECT_EQ(e.attempts(), 2);
    }
}

TEST(ImageStore, SniffsDimsAndRejectsBadIds) {
    const auto dir = test_util::fresh_dir("store");
    ImageStore store(dir);
    const Bytes png = test_util::flat_png(33, 17, 1);
    EXPECT_EQ(sniff_image_format(png), "png");
    EXPECT_EQ(read_image_dims(png), (ImageDims{33, 17}));
    const std::string id = store.put(png);
    EXPECT_EQ(id, to_hex(fnv1a64(png)));
    EXPECT_EQ(store.put(png), id);
    EXPECT_EQ(store.read(id), png);

    const std::string ppm = "P6\n# comment\n12 7\n255\n" + std::string(12 * 7 * 3, '\0');
    const Bytes ppm_bytes(ppm.begin(), ppm.end());
    EXPECT_EQ(read_image_dims(ppm_bytes), (ImageDims{12, 7}));

    // Minimal JPEG header: SOI, APP0 stub, SOF0 with 20x10.
    const Bytes jpg = {0xFF, 0xD8, 0xFF, 0xE0, 0x00, 0x04, 0x00, 0x00, 0xFF, 0xC0, 0x00, 0x0B,
                       0x08, 0x00, 0x0A, 0x00, 0x14, 0x01, 0x01, 0x11, 0x00, 0xFF, 0xD9};
    EXPECT_EQ(read_image_dims(jpg), (ImageDims{20, 10}));

    EXPECT_THROW(read_image_dims(Bytes{'h', 'i'}), ValidationError);
    EXPECT_THROW(store.read("../../etc/passwd"), NotFoundError);
    EXPECT_THROW(store.read("0123456789abcdef"), NotFoundError);
}
