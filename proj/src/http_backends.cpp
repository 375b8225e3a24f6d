#include "curator/http_backends.hpp"

#include <httplib.h>

#include <chrono>
#include <map>
#include <mutex>

#include "curator/errors.hpp"
#include "curator/image_store.hpp"
#include "curator/json_io.hpp"
#include "curator/mock_backends.hpp"

namespace curator {

using nlohmann::json;

namespace {

void set_timeouts(httplib::Client& cli, double seconds) {
    const auto total = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(seconds));
    const auto s = static_cast<time_t>(total.count() / 1'000'000);
    const auto us = static_cast<time_t>(total.count() % 1'000'000);
    cli.set_connection_timeout(s, us);
    cli.set_read_timeout(s, us);
    cli.set_write_timeout(s, us);
}

class HttpInpainter final : public Inpainter {
public:
    HttpInpainter(std::shared_ptr<const HttpClient> c, std::shared_ptr<ImageStore> s)
        : c_(std::move(c)), store_(std::move(s)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/inpaint"; }
    std::string inpaint(const std::string& background_id, const std::string& prompt,
                        const Box& mask, std::uint64_t seed) const override {
        validate(mask);
        if (store_) check_crop_inside(*store_, background_id, mask);
        const json r = c_->post("/v1/inpaint", {{"background_id", background_id},
                                                {"prompt", prompt},
                                                {"mask", mask},
                                                {"seed", seed}});
        return r.at("image_id").get<std::string>();
    }

private:
    std::shared_ptr<const HttpClient> c_;
    std::shared_ptr<ImageStore> store_;
};

class HttpDetector final : public Detector {
public:
    explicit HttpDetector(std::shared_ptr<const HttpClient> c) : c_(std::move(c)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/detect"; }
    std::vector<Detection> detect(const std::string& image_id,
                                  const std::string& target_class) const override {
        const json r = c_->post("/v1/detect", {{"image_id", image_id}, {"target_class", target_class}});
        auto dets = r.at("detections").get<std::vector<Detection>>();
        std::erase_if(dets, [&](const Detection& d) { return d.class_label != target_class; });
        return normalize_detections(std::move(dets));
    }

private:
    std::shared_ptr<const HttpClient> c_;
};

class HttpAesthetic final : public AestheticScorer {
public:
    explicit HttpAesthetic(std::shared_ptr<const HttpClient> c) : c_(std::move(c)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/aesthetic"; }
    double score(const std::string& image_id) const override {
        return c_->post("/v1/aesthetic", {{"image_id", image_id}}).at("score").get<double>();
    }

private:
    std::shared_ptr<const HttpClient> c_;
};

class HttpCaptioner final : public Captioner {
public:
    explicit HttpCaptioner(std::shared_ptr<const HttpClient> c) : c_(std::move(c)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/caption"; }
    std::string caption(const std::string& image_id, const std::string& prompt) const override {
        std::string cap = c_->post("/v1/caption", {{"image_id", image_id}, {"prompt", prompt}})
                              .at("caption")
                              .get<std::string>();
        if (cap.find_first_not_of(" \t\r\n") == std::string::npos)
            throw ApplicationError("captioner returned an empty caption for " + image_id);
        return cap;
    }

private:
    std::shared_ptr<const HttpClient> c_;
};

class HttpEmbedder final : public TextEmbedder {
public:
    explicit HttpEmbedder(std::shared_ptr<const HttpClient> c) : c_(std::move(c)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/embed"; }
    EmbeddingVector embed(const std::string& text) const override {
        if (text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw ValidationError("cannot embed empty text");
        return c_->post("/v1/embed", {{"text", text}}).at("vector").get<EmbeddingVector>();
    }

private:
    std::shared_ptr<const HttpClient> c_;
};

class HttpFeatures final : public FeatureExtractor {
public:
    HttpFeatures(std::shared_ptr<const HttpClient> c, std::shared_ptr<ImageStore> s)
        : c_(std::move(c)), store_(std::move(s)) {}
    std::string id() const override { return "http:" + c_->endpoint().base_url + "/v1/features"; }
    FeatureBundle extract(const std::string& image_id, const Box& crop) const override {
        validate(crop);
        if (store_) check_crop_inside(*store_, image_id, crop);
        const json r = c_->post("/v1/features", {{"image_id", image_id}, {"crop", crop}});
        return {r.at("global").get<EmbeddingVector>(), r.at("spatial").get<EmbeddingVector>(),
                r.value("global_source", id() + "#global"),
                r.value("spatial_source", id() + "#spatial")};
    }

private:
    std::shared_ptr<const HttpClient> c_;
    std::shared_ptr<ImageStore> store_;
};

}  // namespace

HttpClient::HttpClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    validate(endpoint_);
    const std::string& url = endpoint_.base_url;
    const auto scheme_end = url.find("://");
    const auto path_at = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_at == std::string::npos) {
        origin_ = url;
    } else {
        origin_ = url.substr(0, path_at);
        prefix_ = url.substr(path_at);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
}

json HttpClient::post(const std::string& path, const json& body) const {
    const std::string full = prefix_ + path;
    const std::string payload = body.dump();
    const int attempts = endpoint_.retry_limit + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        httplib::Client cli(origin_);
        set_timeouts(cli, endpoint_.timeout_seconds);
        auto res = cli.Post(full, payload, "application/json");
        if (!res) {
            last_error = "POST " + origin_ + full + ": " + httplib::to_string(res.error());
        } else if (res->status >= 500) {
            last_error = "POST " + origin_ + full + ": HTTP " + std::to_string(res->status);
        } else if (res->status >= 400) {
            std::string msg = res->body;
            try {
                msg = json::parse(res->body).value("error", res->body);
            } catch (const json::exception&) {
            }
            throw ApplicationError("POST " + origin_ + full + ": HTTP " +
                                   std::to_string(res->status) + ": " + msg);
        } else {
            try {
                return json::parse(res->body);
            } catch (const json::exception& e) {
                throw ApplicationError("POST " + origin_ + full + ": malformed JSON response: " +
                                       e.what());
            }
        }
        if (attempt < attempts)
            std::this_thread::sleep_for(std::chrono::milliseconds(20 * attempt));
    }
    throw TransportError(last_error, attempts);
}

std::shared_ptr<const Inpainter> make_http_inpainter(std::shared_ptr<const HttpClient> c,
                                                     std::shared_ptr<ImageStore> store) {
    return std::make_shared<HttpInpainter>(std::move(c), std::move(store));
}
std::shared_ptr<const Detector> make_http_detector(std::shared_ptr<const HttpClient> c) {
    return std::make_shared<HttpDetector>(std::move(c));
}
std::shared_ptr<const AestheticScorer> make_http_aesthetic(std::shared_ptr<const HttpClient> c) {
    return std::make_shared<HttpAesthetic>(std::move(c));
}
std::shared_ptr<const Captioner> make_http_captioner(std::shared_ptr<const HttpClient> c) {
    return std::make_shared<HttpCaptioner>(std::move(c));
}
std::shared_ptr<const TextEmbedder> make_http_embedder(std::shared_ptr<const HttpClient> c) {
    return std::make_shared<HttpEmbedder>(std::move(c));
}
std::shared_ptr<const FeatureExtractor> make_http_features(std::shared_ptr<const HttpClient> c,
                                                           std::shared_ptr<ImageStore> store) {
    return std::make_shared<HttpFeatures>(std::move(c), std::move(store));
}

Backends make_http_backends(const BackendEndpoint& endpoint, std::shared_ptr<ImageStore> store) {
    auto c = std::make_shared<const HttpClient>(endpoint);
    return {make_http_inpainter(c, store), make_http_detector(c), make_http_aesthetic(c),
            make_http_captioner(c),        make_http_embedder(c), make_http_features(c, store)};
}

// ---------------------------------------------------------------- server

struct ModelServer::Impl {
    Backends backends;
    httplib::Server server;
    std::thread thread;
    mutable std::mutex mu;
    std::map<std::string, long> hits;

    void count(const std::string& path) {
        std::lock_guard lock(mu);
        ++hits[path];
    }

    template <class F>
    void route(const std::string& path, F handler) {
        server.Post(path, [this, path, handler](const httplib::Request& req, httplib::Response& res) {
            count(path);
            int status = 200;
            json out;
            try {
                out = handler(json::parse(req.body));
            } catch (const json::exception& e) {
                status = 400;
                out = {{"error", std::string("bad request: ") + e.what()}};
            } catch (const ValidationError& e) {
                status = 400;
                out = {{"error", e.what()}};
            } catch (const NotFoundError& e) {
                status = 404;
                out = {{"error", e.what()}};
            } catch (const FixtureMissError& e) {
                status = 404;
                out = {{"error", e.what()}};
            } catch (const ApplicationError& e) {
                status = 422;
                out = {{"error", e.what()}};
            } catch (const std::exception& e) {
                status = 500;
                out = {{"error", e.what()}};
            }
            res.status = status;
            res.set_content(out.dump(), "application/json");
        });
    }
};

ModelServer::ModelServer(Backends backends) : impl_(std::make_unique<Impl>()) {
    impl_->backends = std::move(backends);
    Impl* s = impl_.get();
    s->route("/v1/inpaint", [s](const json& b) {
        return json{{"image_id", s->backends.inpainter->inpaint(
                                     b.at("background_id").get<std::string>(),
                                     b.at("prompt").get<std::string>(), b.at("mask").get<Box>(),
                                     b.at("seed").get<std::uint64_t>())}};
    });
    s->route("/v1/detect", [s](const json& b) {
        return json{{"detections", s->backends.detector->detect(b.at("image_id").get<std::string>(),
                                                                b.at("target_class").get<std::string>())}};
    });
    s->route("/v1/aesthetic", [s](const json& b) {
        return json{{"score", s->backends.aesthetic->score(b.at("image_id").get<std::string>())}};
    });
    s->route("/v1/caption", [s](const json& b) {
        return json{{"caption", s->backends.captioner->caption(b.at("image_id").get<std::string>(),
                                                               b.value("prompt", std::string()))}};
    });
    s->route("/v1/embed", [s](const json& b) {
        return json{{"vector", s->backends.embedder->embed(b.at("text").get<std::string>())}};
    });
    s->route("/v1/features", [s](const json& b) {
        const FeatureBundle f = s->backends.features->extract(b.at("image_id").get<std::string>(),
                                                              b.at("crop").get<Box>());
        return json{{"global", f.global_features},
                    {"spatial", f.spatial_features},
                    {"global_source", f.global_source},
                    {"spatial_source", f.spatial_source}};
    });
}

ModelServer::~ModelServer() { stop(); }

int ModelServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : port;
    if (port != 0 && !impl_->server.bind_to_port(host, port))
        throw IoError("cannot bind model server to " + host + ":" + std::to_string(port));
    if (bound < 0) throw IoError("cannot bind model server to " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void ModelServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port))
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void ModelServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

long ModelServer::hits(const std::string& path) const {
    std::lock_guard lock(impl_->mu);
    auto it = impl_->hits.find(path);
    return it == impl_->hits.end() ? 0 : it->second;
}

}  // namespace curator
