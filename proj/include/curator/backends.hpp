#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/embedding.hpp"
#include "curator/geometry.hpp"

namespace curator {

class ImageStore;

struct Detection {
    std::string class_label;
    double confidence = 0.0;
    Box box;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Pooled outputs of the two frozen backbones for one crop: a global semantic
/// channel and a fine-grained spatial channel.
struct FeatureBundle {
    EmbeddingVector global_features;
    EmbeddingVector spatial_features;
    std::string global_source;
    std::string spatial_source;

    friend bool operator==(const FeatureBundle&, const FeatureBundle&) = default;
};

/// Validates and sorts detections by descending confidence (stable).
std::vector<Detection> normalize_detections(std::vector<Detection> dets);

class Inpainter {
public:
    virtual ~Inpainter() = default;
    virtual std::string id() const = 0;
    virtual std::string inpaint(const std::string& background_id, const std::string& prompt,
                                const Box& mask, std::uint64_t seed) const = 0;
};

class Detector {
public:
    virtual ~Detector() = default;
    virtual std::string id() const = 0;
    /// Detections of target_class only, highest confidence first.
    virtual std::vector<Detection> detect(const std::string& image_id,
                                          const std::string& target_class) const = 0;
};

class AestheticScorer {
public:
    virtual ~AestheticScorer() = default;
    virtual std::string id() const = 0;
    virtual double score(const std::string& image_id) const = 0;
};

class Captioner {
public:
    virtual ~Captioner() = default;
    virtual std::string id() const = 0;
    /// Throws ApplicationError when the backend returns an empty caption.
    virtual std::string caption(const std::string& image_id, const std::string& prompt) const = 0;
};

class TextEmbedder {
public:
    virtual ~TextEmbedder() = default;
    virtual std::string id() const = 0;
    virtual EmbeddingVector embed(const std::string& text) const = 0;
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string id() const = 0;
    virtual FeatureBundle extract(const std::string& image_id, const Box& crop) const = 0;
};

/// The full set of model services a pipeline run talks to. Immutable after
/// construction and shared across worker threads.
struct Backends {
    std::shared_ptr<const Inpainter> inpainter;
    std::shared_ptr<const Detector> detector;
    std::shared_ptr<const AestheticScorer> aesthetic;
    std::shared_ptr<const Captioner> captioner;
    std::shared_ptr<const TextEmbedder> embedder;
    std::shared_ptr<const FeatureExtractor> features;

    /// Backend identifier per service, recorded in manifests.
    nlohmann::json identifiers() const;
};

struct BackendEndpoint {
    std::string base_url;
    double timeout_seconds = 30.0;
    int retry_limit = 2;
};

void validate(const BackendEndpoint& e);

/// How one service is provided. `kind` is "mock-hash", "mock-scripted" or
/// "http".
struct BackendSpec {
    std::string kind = "mock-hash";
    std::uint64_t seed = 0;
    std::string fixture;  // mock-scripted: path to fixture JSON
    BackendEndpoint endpoint;
    int embed_dim = 64;
    int global_dim = 768;
    int spatial_dim = 1024;
};

/// Per-service specs; any service without an override uses `fallback`.
struct BackendsConfig {
    BackendSpec fallback;
    std::map<std::string, BackendSpec> overrides;  // keys: inpainter detector aesthetic captioner embedder features

    const BackendSpec& spec_for(const std::string& service) const;
};

/// Builds the backend set described by cfg. Selection happens at runtime so
/// real model servers can replace mocks without rebuilding.
Backends make_backends(const BackendsConfig& cfg, std::shared_ptr<ImageStore> store);

}  // namespace curator
