#include "curator/backends.hpp"

#include <algorithm>
#include <cmath>

#include "curator/errors.hpp"
#include "curator/http_backends.hpp"
#include "curator/image_store.hpp"
#include "curator/mock_backends.hpp"

namespace curator {

std::vector<Detection> normalize_detections(std::vector<Detection> dets) {
    for (const Detection& d : dets) {
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
            throw ValidationError("detection confidence outside [0,1]: " + std::to_string(d.confidence));
        validate(d.box);
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return a.confidence > b.confidence;
    });
    return dets;
}

nlohmann::json Backends::identifiers() const {
    auto name = [](const auto& p) { return p ? p->id() : std::string("none"); };
    return {{"inpainter", name(inpainter)}, {"detector", name(detector)},
            {"aesthetic", name(aesthetic)}, {"captioner", name(captioner)},
            {"embedder", name(embedder)},   {"features", name(features)}};
}

void validate(const BackendEndpoint& e) {
    if (!(e.timeout_seconds > 0.0) || !std::isfinite(e.timeout_seconds))
        throw ConfigError("backend timeout must be positive");
    if (e.retry_limit < 0 || e.retry_limit > 10)
        throw ConfigError("retry_limit must be in [0, 10]");
    if (e.base_url.empty()) throw ConfigError("backend base_url is empty");
}

const BackendSpec& BackendsConfig::spec_for(const std::string& service) const {
    auto it = overrides.find(service);
    return it == overrides.end() ? fallback : it->second;
}

Backends make_backends(const BackendsConfig& cfg, std::shared_ptr<ImageStore> store) {
    static const std::vector<std::string> services = {"inpainter", "detector", "aesthetic",
                                                      "captioner", "embedder", "features"};
    for (const auto& [k, v] : cfg.overrides) {
        if (std::find(services.begin(), services.end(), k) == services.end())
            throw ConfigError("unknown backend service '" + k + "'");
    }

    std::map<std::string, std::shared_ptr<const Fixture>> fixtures;
    auto fixture = [&](const BackendSpec& s) {
        if (s.fixture.empty()) throw ConfigError("mock-scripted backend needs a fixture path");
        auto& fx = fixtures[s.fixture];
        if (!fx) fx = Fixture::load(s.fixture);
        return fx;
    };
    auto client = [](const BackendSpec& s) { return std::make_shared<const HttpClient>(s.endpoint); };
    auto check_kind = [](const BackendSpec& s, const std::string& service) {
        if (s.kind != "mock-hash" && s.kind != "mock-scripted" && s.kind != "http")
            throw ConfigError("unknown backend kind '" + s.kind + "' for " + service);
    };

    Backends b;
    {
        const auto& s = cfg.spec_for("inpainter");
        check_kind(s, "inpainter");
        if (s.kind == "mock-hash") b.inpainter = std::make_shared<HashInpainter>(store, s.seed);
        else if (s.kind == "mock-scripted") b.inpainter = std::make_shared<ScriptedInpainter>(fixture(s), store);
        else b.inpainter = make_http_inpainter(client(s), store);
    }
    {
        const auto& s = cfg.spec_for("detector");
        check_kind(s, "detector");
        if (s.kind == "mock-hash") b.detector = std::make_shared<HashDetector>(store, s.seed);
        else if (s.kind == "mock-scripted") b.detector = std::make_shared<ScriptedDetector>(fixture(s));
        else b.detector = make_http_detector(client(s));
    }
    {
        const auto& s = cfg.spec_for("aesthetic");
        check_kind(s, "aesthetic");
        if (s.kind == "mock-hash") b.aesthetic = std::make_shared<HashAestheticScorer>(s.seed);
        else if (s.kind == "mock-scripted") b.aesthetic = std::make_shared<ScriptedAestheticScorer>(fixture(s));
        else b.aesthetic = make_http_aesthetic(client(s));
    }
    {
        const auto& s = cfg.spec_for("captioner");
        check_kind(s, "captioner");
        if (s.kind == "mock-hash") b.captioner = std::make_shared<HashCaptioner>(s.seed);
        else if (s.kind == "mock-scripted") b.captioner = std::make_shared<ScriptedCaptioner>(fixture(s));
        else b.captioner = make_http_captioner(client(s));
    }
    {
        const auto& s = cfg.spec_for("embedder");
        check_kind(s, "embedder");
        if (s.kind == "mock-hash") b.embedder = std::make_shared<HashTextEmbedder>(s.embed_dim, s.seed);
        else if (s.kind == "mock-scripted") b.embedder = std::make_shared<ScriptedTextEmbedder>(fixture(s));
        else b.embedder = make_http_embedder(client(s));
    }
    {
        const auto& s = cfg.spec_for("features");
        check_kind(s, "features");
        if (s.kind == "mock-hash")
            b.features = std::make_shared<HashFeatureExtractor>(store, s.global_dim, s.spatial_dim, s.seed);
        else if (s.kind == "mock-scripted")
            b.features = std::make_shared<ScriptedFeatureExtractor>(fixture(s), store);
        else b.features = make_http_features(client(s), store);
    }
    return b;
}

}  // namespace curator
