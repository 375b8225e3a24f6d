#pragma once

// JSON-over-HTTP transport for the model services.
//
//   POST /v1/inpaint   {background_id, prompt, mask:[x0,y0,x1,y1], seed} -> {image_id}
//   POST /v1/detect    {image_id, target_class} -> {detections:[{label, confidence, box}]}
//   POST /v1/aesthetic {image_id} -> {score}
//   POST /v1/caption   {image_id, prompt} -> {caption}
//   POST /v1/embed     {text} -> {vector:[...]}
//   POST /v1/features  {image_id, crop:[x0,y0,x1,y1]} -> {global:[...], spatial:[...]}
//
// 4xx responses are application errors and are not retried; connection
// failures, timeouts and 5xx are transport errors, retried retry_limit times.

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include "curator/backends.hpp"

namespace curator {

class HttpClient {
public:
    explicit HttpClient(BackendEndpoint endpoint);

    const BackendEndpoint& endpoint() const noexcept { return endpoint_; }
    /// POSTs body to <base_url><path>; returns the parsed JSON response.
    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

private:
    BackendEndpoint endpoint_;
    std::string origin_;  // scheme://host:port
    std::string prefix_;  // optional path prefix from base_url
};

/// Client implementations of every service interface. The optional image
/// store lets the client reject out-of-bounds masks and crops before sending.
Backends make_http_backends(const BackendEndpoint& endpoint, std::shared_ptr<ImageStore> store);

std::shared_ptr<const Inpainter> make_http_inpainter(std::shared_ptr<const HttpClient> c,
                                                     std::shared_ptr<ImageStore> store);
std::shared_ptr<const Detector> make_http_detector(std::shared_ptr<const HttpClient> c);
std::shared_ptr<const AestheticScorer> make_http_aesthetic(std::shared_ptr<const HttpClient> c);
std::shared_ptr<const Captioner> make_http_captioner(std::shared_ptr<const HttpClient> c);
std::shared_ptr<const TextEmbedder> make_http_embedder(std::shared_ptr<const HttpClient> c);
std::shared_ptr<const FeatureExtractor> make_http_features(std::shared_ptr<const HttpClient> c,
                                                           std::shared_ptr<ImageStore> store);

/// Serves a Backends set over the wire protocol. Used to put mocks behind a
/// real socket and as a reference server for integrating model services.
class ModelServer {
public:
    explicit ModelServer(Backends backends);
    ~ModelServer();
    ModelServer(const ModelServer&) = delete;
    ModelServer& operator=(const ModelServer&) = delete;

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Blocks serving on the calling thread.
    void listen(const std::string& host, int port);
    void stop();

    /// Requests received per path, for tests.
    long hits(const std::string& path) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace curator
