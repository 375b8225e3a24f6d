#pragma once

// Deterministic stand-ins for the model services. Hash mocks derive every
// output from (inputs, seed); scripted mocks replay a fixture file and raise
// FixtureMissError for anything the fixture does not cover.
//
// Fixture layout:
//   {
//     "inpaint":   {"<background_id>|<seed>": "<image_id>"},
//     "detect":    {"<image_id>|<class>": [{"label", "confidence", "box"}]},
//     "aesthetic": {"<image_id>": 6.2},
//     "caption":   {"<image_id>": "a dog in an elevator"},
//     "embed":     {"<text>": [0.1, ...]},
//     "features":  {"<image_id>": {"global": [...], "spatial": [...]}}
//   }

#include <filesystem>
#include <memory>

#include <json.hpp>

#include "curator/backends.hpp"
#include "curator/image_store.hpp"

namespace curator {

class HashInpainter final : public Inpainter {
public:
    HashInpainter(std::shared_ptr<ImageStore> store, std::uint64_t seed);
    std::string id() const override { return "mock-hash/inpainter"; }
    /// Writes a PNG with the background's dims: a flat base color with the
    /// mask rectangle painted in an object color. Provenance (including the
    /// mask) goes to the image sidecar.
    std::string inpaint(const std::string& background_id, const std::string& prompt,
                        const Box& mask, std::uint64_t seed) const override;

private:
    std::shared_ptr<ImageStore> store_;
    std::uint64_t seed_;
};

class HashDetector final : public Detector {
public:
    HashDetector(std::shared_ptr<ImageStore> store, std::uint64_t seed);
    std::string id() const override { return "mock-hash/detector"; }
    /// Finds the "object" where the inpainter painted it (read from the image
    /// provenance), with hash-derived confidence and box jitter. Images
    /// without provenance have no detections.
    std::vector<Detection> detect(const std::string& image_id,
                                  const std::string& target_class) const override;

private:
    std::shared_ptr<ImageStore> store_;
    std::uint64_t seed_;
};

class HashAestheticScorer final : public AestheticScorer {
public:
    explicit HashAestheticScorer(std::uint64_t seed) : seed_(seed) {}
    std::string id() const override { return "mock-hash/aesthetic"; }
    double score(const std::string& image_id) const override;

private:
    std::uint64_t seed_;
};

class HashCaptioner final : public Captioner {
public:
    explicit HashCaptioner(std::uint64_t seed) : seed_(seed) {}
    std::string id() const override { return "mock-hash/captioner"; }
    std::string caption(const std::string& image_id, const std::string& prompt) const override;

private:
    std::uint64_t seed_;
};

/// Bag-of-words pseudo-embedding: each lowercase token contributes a seeded
/// Gaussian vector, plus a small whole-text term so distinct strings never
/// collide. Texts sharing most words land close together.
class HashTextEmbedder final : public TextEmbedder {
public:
    HashTextEmbedder(int dim, std::uint64_t seed);
    std::string id() const override { return "mock-hash/embedder"; }
    EmbeddingVector embed(const std::string& text) const override;

private:
    int dim_;
    std::uint64_t seed_;
};

class HashFeatureExtractor final : public FeatureExtractor {
public:
    HashFeatureExtractor(std::shared_ptr<ImageStore> store, int global_dim, int spatial_dim,
                         std::uint64_t seed);
    std::string id() const override { return "mock-hash/features"; }
    FeatureBundle extract(const std::string& image_id, const Box& crop) const override;

private:
    std::shared_ptr<ImageStore> store_;
    int global_dim_;
    int spatial_dim_;
    std::uint64_t seed_;
};

/// Read-only fixture shared by the scripted mocks.
class Fixture {
public:
    explicit Fixture(nlohmann::json doc);
    static std::shared_ptr<const Fixture> load(const std::filesystem::path& path);

    /// Throws FixtureMissError if section/key is absent.
    const nlohmann::json& lookup(const std::string& section, const std::string& key) const;

private:
    nlohmann::json doc_;
};

class ScriptedInpainter final : public Inpainter {
public:
    ScriptedInpainter(std::shared_ptr<const Fixture> fx, std::shared_ptr<ImageStore> store)
        : fx_(std::move(fx)), store_(std::move(store)) {}
    std::string id() const override { return "mock-scripted/inpainter"; }
    std::string inpaint(const std::string& background_id, const std::string& prompt,
                        const Box& mask, std::uint64_t seed) const override;

private:
    std::shared_ptr<const Fixture> fx_;
    std::shared_ptr<ImageStore> store_;
};

class ScriptedDetector final : public Detector {
public:
    explicit ScriptedDetector(std::shared_ptr<const Fixture> fx) : fx_(std::move(fx)) {}
    std::string id() const override { return "mock-scripted/detector"; }
    std::vector<Detection> detect(const std::string& image_id,
                                  const std::string& target_class) const override;

private:
    std::shared_ptr<const Fixture> fx_;
};

class ScriptedAestheticScorer final : public AestheticScorer {
public:
    explicit ScriptedAestheticScorer(std::shared_ptr<const Fixture> fx) : fx_(std::move(fx)) {}
    std::string id() const override { return "mock-scripted/aesthetic"; }
    double score(const std::string& image_id) const override;

private:
    std::shared_ptr<const Fixture> fx_;
};

class ScriptedCaptioner final : public Captioner {
public:
    explicit ScriptedCaptioner(std::shared_ptr<const Fixture> fx) : fx_(std::move(fx)) {}
    std::string id() const override { return "mock-scripted/captioner"; }
    std::string caption(const std::string& image_id, const std::string& prompt) const override;

private:
    std::shared_ptr<const Fixture> fx_;
};

class ScriptedTextEmbedder final : public TextEmbedder {
public:
    explicit ScriptedTextEmbedder(std::shared_ptr<const Fixture> fx) : fx_(std::move(fx)) {}
    std::string id() const override { return "mock-scripted/embedder"; }
    EmbeddingVector embed(const std::string& text) const override;

private:
    std::shared_ptr<const Fixture> fx_;
};

class ScriptedFeatureExtractor final : public FeatureExtractor {
public:
    ScriptedFeatureExtractor(std::shared_ptr<const Fixture> fx, std::shared_ptr<ImageStore> store)
        : fx_(std::move(fx)), store_(std::move(store)) {}
    std::string id() const override { return "mock-scripted/features"; }
    FeatureBundle extract(const std::string& image_id, const Box& crop) const override;

private:
    std::shared_ptr<const Fixture> fx_;
    std::shared_ptr<ImageStore> store_;
};

/// Throws ValidationError unless crop is a valid box inside the image.
void check_crop_inside(const ImageStore& store, const std::string& image_id, const Box& crop);

}  // namespace curator
