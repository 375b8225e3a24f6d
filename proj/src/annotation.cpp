#include "curator/annotation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>
#include <thread>

#include <httplib.h>

#include "curator/errors.hpp"
#include "curator/jsonl.hpp"

namespace curator {

using nlohmann::json;
namespace fs = std::filesystem;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
    return buf;
}

void to_json(json& j, const AnnotationRecord& r) {
    j = {{"seq", r.seq},
         {"candidate_id", r.candidate_id},
         {"annotator_id", r.annotator_id},
         {"label", to_string(r.label)},
         {"annotated_at", r.annotated_at}};
}

void from_json(const json& j, AnnotationRecord& r) {
    r.seq = j.at("seq").get<std::int64_t>();
    r.candidate_id = j.at("candidate_id").get<std::string>();
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.label = parse_label(j.at("label").get<std::string>());
    r.annotated_at = j.value("annotated_at", std::string());
}

void validate_annotator_id(const std::string& id) {
    if (id.empty() || id.size() > 128) throw ValidationError("annotator_id must be 1..128 characters");
    for (unsigned char c : id) {
        if (c < 0x21 || c > 0x7e) throw ValidationError("annotator_id must be printable ASCII without spaces");
    }
}

std::string to_string(Resolution r) { return r == Resolution::majority ? "majority" : "any"; }

Resolution parse_resolution(const std::string& s) {
    if (s == "majority") return Resolution::majority;
    if (s == "any") return Resolution::any;
    throw ValidationError("resolution must be 'majority' or 'any', got '" + s + "'");
}

// ------------------------------------------------------------ label store

LabelStore::LabelStore(fs::path path) : path_(std::move(path)) {
    std::error_code ec;
    fs::create_directories(path_.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path_.parent_path().string() + ": " + ec.message());
    for (const json& line : read_jsonl(path_)) {
        AnnotationRecord r;
        try {
            r = line.get<AnnotationRecord>();
        } catch (const std::exception& e) {
            throw FormatError("bad record in " + path_.string() + ": " + e.what());
        }
        current_[{r.candidate_id, r.annotator_id}] = r;
        records_.push_back(std::move(r));
    }
}

AnnotationRecord LabelStore::append(const std::string& candidate_id, const std::string& annotator_id,
                                    Label label, const std::string& annotated_at) {
    std::lock_guard lock(mu_);
    AnnotationRecord r{records_.empty() ? 1 : records_.back().seq + 1, candidate_id, annotator_id, label,
                       annotated_at};
    append_jsonl(path_, json(r));
    current_[{r.candidate_id, r.annotator_id}] = r;
    records_.push_back(r);
    return r;
}

std::vector<AnnotationRecord> LabelStore::log() const {
    std::lock_guard lock(mu_);
    return records_;
}

std::map<std::pair<std::string, std::string>, AnnotationRecord> LabelStore::current() const {
    std::lock_guard lock(mu_);
    return current_;
}

// ------------------------------------------------------- annotation service

AnnotationService::AnnotationService(fs::path workspace, std::shared_ptr<const CandidateCatalog> catalog,
                                     std::shared_ptr<ImageStore> images, Clock clock)
    : workspace_(std::move(workspace)),
      catalog_(std::move(catalog)),
      images_(std::move(images)),
      clock_(clock ? std::move(clock) : Clock(utc_timestamp)) {}

fs::path AnnotationService::label_log_path(const fs::path& workspace, const std::string& run_id) {
    return workspace / run_id / "labels.jsonl";
}

std::vector<ReviewCandidate> AnnotationService::run_candidates(const std::string& run_id) const {
    auto c = catalog_->candidates(run_id);
    if (!c) throw NotFoundError("unknown run '" + run_id + "'");
    return std::move(*c);
}

LabelStore& AnnotationService::store_for(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    auto& s = stores_[run_id];
    if (!s) s = std::make_unique<LabelStore>(label_log_path(workspace_, run_id));
    return *s;
}

std::vector<ReviewCandidate> AnnotationService::next_pending(const std::string& run_id,
                                                             const std::string& annotator_id, int count) const {
    validate_annotator_id(annotator_id);
    if (count < 0) throw ValidationError("count must be nonnegative");
    std::vector<ReviewCandidate> all = run_candidates(run_id);
    const auto current = store_for(run_id).current();
    std::vector<ReviewCandidate> out;
    for (ReviewCandidate& c : all) {
        if (static_cast<int>(out.size()) >= count) break;
        if (!c.stage1_passed || current.count({c.candidate_id, annotator_id})) continue;
        out.push_back(std::move(c));
    }
    return out;
}

AnnotationRecord AnnotationService::submit_label(const std::string& run_id, const std::string& candidate_id,
                                                 Label label, const std::string& annotator_id) {
    validate_annotator_id(annotator_id);
    const std::vector<ReviewCandidate> all = run_candidates(run_id);
    const auto it = std::find_if(all.begin(), all.end(),
                                 [&](const ReviewCandidate& c) { return c.candidate_id == candidate_id; });
    if (it == all.end()) throw NotFoundError("unknown candidate '" + candidate_id + "' in run " + run_id);
    if (!it->stage1_passed)
        throw ConflictError("candidate '" + candidate_id + "' did not pass Stage 1 and cannot be labeled");
    return store_for(run_id).append(candidate_id, annotator_id, label, clock_());
}

QueueState AnnotationService::progress(const std::string& run_id,
                                       const std::optional<std::string>& annotator_id) const {
    if (annotator_id) validate_annotator_id(*annotator_id);
    const std::vector<ReviewCandidate> all = run_candidates(run_id);
    const auto current = store_for(run_id).current();
    std::set<std::string> labeled_by_anyone;
    for (const auto& [key, rec] : current) labeled_by_anyone.insert(key.first);

    QueueState q;
    for (const ReviewCandidate& c : all) {
        if (!c.stage1_passed) continue;
        ++q.total;
        const bool labeled = annotator_id ? current.count({c.candidate_id, *annotator_id}) > 0
                                          : labeled_by_anyone.count(c.candidate_id) > 0;
        if (labeled) ++q.labeled;
    }
    q.pending = q.total - q.labeled;
    return q;
}

LabelExport AnnotationService::export_labels(const std::string& run_id, Resolution resolution) const {
    const std::vector<ReviewCandidate> all = run_candidates(run_id);
    std::map<std::string, std::string> image_of;
    for (const ReviewCandidate& c : all) image_of[c.candidate_id] = c.image_id;

    const auto current = store_for(run_id).current();
    if (current.empty()) throw EmptyExportError("run " + run_id + " has no labels to export");

    LabelExport e;
    e.resolution = resolution;
    // current is ordered by (candidate_id, annotator_id), which fixes the output order.
    if (resolution == Resolution::any) {
        for (const auto& [key, rec] : current) {
            e.examples.push_back({key.first, image_of[key.first], rec.label, key.second,
                                  rec.label == Label::accept, rec.label == Label::reject});
        }
        return e;
    }
    std::map<std::string, std::pair<int, int>> votes;
    for (const auto& [key, rec] : current) {
        auto& v = votes[key.first];
        (rec.label == Label::accept ? v.first : v.second) += 1;
    }
    for (const auto& [cand, v] : votes) {
        if (v.first == v.second) {
            e.ties.push_back(cand);
            continue;
        }
        e.examples.push_back({cand, image_of[cand], v.first > v.second ? Label::accept : Label::reject, "",
                              v.first, v.second});
    }
    return e;
}

json export_json(const std::string& run_id, const LabelExport& e) {
    json examples = json::array();
    for (const ExportedLabel& x : e.examples) {
        json j = {{"candidate_id", x.candidate_id},
                  {"image_id", x.image_id},
                  {"label", to_string(x.label)},
                  {"accept_votes", x.accept_votes},
                  {"reject_votes", x.reject_votes}};
        if (!x.annotator_id.empty()) j["annotator_id"] = x.annotator_id;
        examples.push_back(std::move(j));
    }
    return {{"run_id", run_id}, {"resolution", to_string(e.resolution)}, {"examples", examples}, {"ties", e.ties}};
}

// ------------------------------------------------------------ HTTP server

struct AnnotationServer::Impl {
    std::shared_ptr<AnnotationService> service;
    AnnotationServerOptions options;
    httplib::Server server;
    std::thread thread;

    void cors(httplib::Response& res) const {
        res.set_header("Access-Control-Allow-Origin", options.cors_origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Max-Age", "600");
    }

    static void error(httplib::Response& res, int status, const std::string& kind, const std::string& msg) {
        res.status = status;
        res.set_content(json{{"error", msg}, {"kind", kind}}.dump(), "application/json");
    }

    template <class F>
    auto guarded(F body) {
        return [this, body](const httplib::Request& req, httplib::Response& res) {
            cors(res);
            try {
                body(req, res);
            } catch (const json::exception& e) {
                error(res, 400, "bad-request", std::string("malformed request: ") + e.what());
            } catch (const ValidationError& e) {
                error(res, 400, "bad-request", e.what());
            } catch (const NotFoundError& e) {
                error(res, 404, "not-found", e.what());
            } catch (const ConflictError& e) {
                error(res, 409, "conflict", e.what());
            } catch (const EmptyExportError& e) {
                error(res, 409, "empty-export", e.what());
            } catch (const std::exception& e) {
                error(res, 500, "internal", e.what());
            }
        };
    }

    static std::string run_id(const httplib::Request& req) { return req.matches[1].str(); }

    static json item_json(const ReviewCandidate& c) {
        json j = c.details;
        j["candidate_id"] = c.candidate_id;
        j["image_id"] = c.image_id;
        j["image_url"] = "/api/v1/images/" + c.image_id;
        return j;
    }

    void routes() {
        const std::string run = R"(/api/v1/runs/([A-Za-z0-9._-]+))";

        server.Options(R"(/api/v1/.*)", [this](const httplib::Request&, httplib::Response& res) {
            cors(res);
            res.status = 204;
        });

        server.Get(run + "/queue", guarded([this](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("annotator")) throw ValidationError("annotator query parameter is required");
            int count = 10;
            if (req.has_param("count")) {
                try {
                    count = std::stoi(req.get_param_value("count"));
                } catch (const std::exception&) {
                    throw ValidationError("count must be an integer");
                }
                if (count < 0 || count > 1000) throw ValidationError("count must lie in [0, 1000]");
            }
            const std::string annotator = req.get_param_value("annotator");
            json items = json::array();
            for (const ReviewCandidate& c : service->next_pending(run_id(req), annotator, count))
                items.push_back(item_json(c));
            const QueueState q = service->progress(run_id(req), annotator);
            res.set_content(json{{"run_id", run_id(req)},
                                 {"annotator_id", annotator},
                                 {"items", items},
                                 {"pending", q.pending},
                                 {"labeled", q.labeled},
                                 {"total", q.total}}
                                .dump(),
                            "application/json");
        }));

        server.Post(run + "/labels", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = json::parse(req.body);
            const AnnotationRecord r =
                service->submit_label(run_id(req), body.at("candidate_id").get<std::string>(),
                                      parse_label(body.at("label").get<std::string>()),
                                      body.at("annotator_id").get<std::string>());
            res.status = 201;
            res.set_content(json(r).dump(), "application/json");
        }));

        server.Get(run + "/progress", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> annotator;
            if (req.has_param("annotator")) annotator = req.get_param_value("annotator");
            const QueueState q = service->progress(run_id(req), annotator);
            res.set_content(json{{"pending", q.pending}, {"labeled", q.labeled}, {"total", q.total}}.dump(),
                            "application/json");
        }));

        server.Get(run + "/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const Resolution r = parse_resolution(
                req.has_param("resolution") ? req.get_param_value("resolution") : std::string("majority"));
            res.set_content(export_json(run_id(req), service->export_labels(run_id(req), r)).dump(),
                            "application/json");
        }));

        server.Get(R"(/api/v1/images/([A-Za-z0-9]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1].str();
                       const Bytes bytes = service->images().read(id);
                       const std::string fmt = sniff_image_format(bytes);
                       const std::string type = fmt == "png"   ? "image/png"
                                                : fmt == "jpg" ? "image/jpeg"
                                                               : "image/x-portable-pixmap";
                       res.set_content(std::string(bytes.begin(), bytes.end()), type);
                   }));
    }
};

AnnotationServer::AnnotationServer(std::shared_ptr<AnnotationService> service, AnnotationServerOptions options)
    : impl_(std::make_unique<Impl>()) {
    impl_->service = std::move(service);
    impl_->options = std::move(options);
    impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw IoError("cannot bind annotation server to " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port))
        throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace curator
