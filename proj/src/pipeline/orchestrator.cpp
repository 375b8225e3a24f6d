#include "curator/pipeline/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "curator/errors.hpp"
#include "curator/hashing.hpp"
#include "curator/json_io.hpp"
#include "curator/jsonl.hpp"
#include "curator/pipeline/manifest.hpp"

namespace curator {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception stops the remaining work and is rethrown.
template <class F>
void parallel_for(std::size_t n, int workers, F fn) {
    if (n == 0) return;
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex mu;
    auto body = [&] {
        while (!stop) {
            const std::size_t i = next++;
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        }
    };
    if (threads == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
}

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm";
}

/// Config fields that determine Stage-1 output. Changing any of them under an
/// existing run would mix incompatible candidates.
json stage1_identity(const PipelineConfig& c) {
    const json j = c;
    return {{"run_id", j["run_id"]},       {"target_class", j["target_class"]},
            {"prompt", j["prompt"]},       {"roi", j["roi"]},
            {"gate_thresholds", j["gate_thresholds"]}, {"backends", j["backends"]},
            {"master_seed", j["master_seed"]}};
}

bool passed_stage1(const GenerationCandidate& c) {
    return std::find(c.history.begin(), c.history.end(), CandidateState::stage1_passed) != c.history.end();
}

std::vector<double> seeded_direction(std::uint64_t seed, std::size_t dim) {
    HashStream hs(mix64(seed ^ 0x51'3a7e'd0c1ULL));
    std::vector<double> v(dim);
    for (double& x : v) x = hs.normal();
    return v;
}

}  // namespace

std::uint64_t candidate_seed(const std::string& run_id, const std::string& background_id, int index,
                             std::uint64_t master_seed) {
    return mix64(stable_hash({run_id, background_id, std::to_string(index)}) ^ mix64(master_seed));
}

Box classifier_crop(const GenerationCandidate& c, double ratio, const ImageDims& dims) {
    const Box base = c.score_card && c.score_card->b_det ? *c.score_card->b_det : c.mask;
    return expand_and_crop(base, ratio, dims);
}

std::map<std::string, Label> load_holdout_labels(const fs::path& p) {
    std::vector<json> records;
    const std::string ext = p.extension().string();
    if (ext == ".jsonl") {
        records = read_jsonl(p);
    } else {
        const json doc = read_json_file(p);
        if (doc.is_object() && doc.contains("examples")) {
            records = doc["examples"].get<std::vector<json>>();
        } else if (doc.is_array()) {
            records = doc.get<std::vector<json>>();
        } else if (doc.is_object()) {
            for (const auto& [id, label] : doc.items()) records.push_back({{"candidate_id", id}, {"label", label}});
        } else {
            throw FormatError(p.string() + ": expected a label export, an array or an object");
        }
    }
    std::map<std::string, Label> out;
    for (const json& r : records) {
        if (!r.is_object() || !r.contains("candidate_id") || !r.contains("label"))
            throw FormatError(p.string() + ": every record needs candidate_id and label");
        const std::string id = r["candidate_id"].get<std::string>();
        const Label label = parse_label(r["label"].get<std::string>());
        const auto [it, inserted] = out.emplace(id, label);
        if (!inserted && it->second != label)
            throw ValidationError("conflicting holdout labels for " + id + "; export with resolution=majority");
    }
    return out;
}

Pipeline::Pipeline(Workspace ws, PipelineConfig cfg)
    : ws_(std::move(ws)), cfg_(std::move(cfg)), backends_(make_backends(cfg_.backends, ws_.images())) {
    validate(cfg_);
}

Pipeline::Pipeline(Workspace ws, PipelineConfig cfg, Backends backends)
    : ws_(std::move(ws)), cfg_(std::move(cfg)), backends_(std::move(backends)) {
    validate(cfg_);
}

std::shared_ptr<AnnotationService> Pipeline::annotation_service() const {
    return std::make_shared<AnnotationService>(ws_.root(), std::make_shared<WorkspaceCatalog>(ws_), ws_.images());
}

void Pipeline::check_run_config() const {
    const fs::path p = ws_.run_file(cfg_.run_id, "config.json");
    if (!fs::exists(p)) return;
    const PipelineConfig stored = read_json_file(p).get<PipelineConfig>();
    if (stage1_identity(stored) != stage1_identity(cfg_))
        throw ConfigError("run '" + cfg_.run_id +
                          "' already exists with different generation settings; use a new run_id");
}

// ------------------------------------------------------------------ ingest

std::vector<BackgroundRecord> Pipeline::ingest() {
    check_run_config();
    if (!fs::is_directory(cfg_.background_dir))
        throw ConfigError("background_dir " + cfg_.background_dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(cfg_.background_dir))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (files.empty()) throw ConfigError("no background images in " + cfg_.background_dir.string());

    std::vector<BackgroundRecord> out;
    std::set<std::string> seen;
    for (const fs::path& f : files) {
        const Bytes bytes = read_file(f);
        const std::string id = ws_.images()->put(bytes, {{"source", "background"}, {"filename", f.filename().string()}});
        if (!seen.insert(id).second) continue;  // identical content under another name
        const ImageDims dims = ws_.images()->dims(id);
        if (!dims.bounds().contains(cfg_.roi.roi))
            throw ConfigError("roi " + json(cfg_.roi.roi).dump() + " does not fit background " +
                              f.filename().string() + " (" + std::to_string(dims.width) + "x" +
                              std::to_string(dims.height) + ")");
        out.push_back({id, f.filename().string(), dims});
    }
    fs::create_directories(ws_.run_dir(cfg_.run_id));
    write_text_atomic(ws_.run_file(cfg_.run_id, "config.json"), json(cfg_).dump(2));
    write_text_atomic(ws_.run_file(cfg_.run_id, "backgrounds.json"), json(out).dump(2));
    return out;
}

// ----------------------------------------------------------------- stage 1

GenerationCandidate Pipeline::process_candidate(const BackgroundRecord& bg, int index) const {
    GenerationCandidate c;
    c.candidate_id = make_candidate_id(bg.background_id, index);
    c.background_id = bg.background_id;
    c.index = index;
    c.seed = candidate_seed(cfg_.run_id, bg.background_id, index, cfg_.master_seed);
    c.mask = sample_mask_box(cfg_.roi, c.seed);

    ScoreCard card;
    try {
        c.image_id = backends_.inpainter->inpaint(bg.background_id, cfg_.prompt, c.mask, c.seed);
        card = score_candidate(backends_, c.image_id, cfg_.target_class, cfg_.prompt, c.mask);
    } catch (const IoError&) {
        throw;  // local disk trouble is not a backend failure
    } catch (const std::exception& e) {
        card.incomplete_component = "inpainter";
        card.error = e.what();
    }
    card.backend_ids["inpainter"] = backends_.inpainter->id();
    c.gate_decision = apply_gates(card, cfg_.gate_thresholds);
    c.score_card = std::move(card);
    c.advance(c.gate_decision->passed ? CandidateState::stage1_passed : CandidateState::stage1_failed);
    return c;
}

Stage1Stats Pipeline::run_stage1(const Stage1Options& opts) {
    check_run_config();
    if (!ws_.has_run(cfg_.run_id)) ingest();
    const std::vector<BackgroundRecord> backgrounds = load_backgrounds(ws_, cfg_.run_id);
    if (backgrounds.empty()) throw ConfigError("run " + cfg_.run_id + " has no backgrounds");
    // A larger candidates_per_background extends an existing run.
    write_text_atomic(ws_.run_file(cfg_.run_id, "config.json"), json(cfg_).dump(2));

    Stage1Log log(ws_.run_file(cfg_.run_id, "stage1.jsonl"));
    const auto existing = log.latest();

    Stage1Stats stats;
    std::vector<std::pair<const BackgroundRecord*, int>> todo;
    for (const BackgroundRecord& bg : backgrounds) {
        for (int i = 0; i < cfg_.candidates_per_background; ++i) {
            ++stats.total;
            const auto it = existing.find(make_candidate_id(bg.background_id, i));
            if (it != existing.end() && !(opts.retry_incomplete && it->second.incomplete())) {
                ++stats.skipped;
                continue;
            }
            todo.emplace_back(&bg, i);
        }
    }
    if (opts.stop_after && todo.size() > *opts.stop_after) todo.resize(*opts.stop_after);

    parallel_for(todo.size(), cfg_.concurrency, [&](std::size_t k) {
        log.append(process_candidate(*todo[k].first, todo[k].second));
    });
    stats.processed = todo.size();

    for (const auto& [id, c] : log.latest()) {
        if (c.state == CandidateState::stage1_passed) ++stats.passed;
        if (c.state == CandidateState::stage1_failed) ++stats.failed;
        if (c.incomplete()) ++stats.incomplete;
    }
    return stats;
}

// --------------------------------------------------------- annotation sim

std::optional<Label> Pipeline::simulated_truth(const GenerationCandidate& c, const ImageDims& dims) const {
    try {
        const FeatureBundle f = backends_.features->extract(c.image_id, classifier_crop(c, cfg_.expand_ratio, dims));
        const auto dir = seeded_direction(cfg_.simulated_annotation->seed, f.global_features.dim());
        return dot(f.global_features.values(), dir) > 0.0 ? Label::accept : Label::reject;
    } catch (const IoError&) {
        throw;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

SimulationStats Pipeline::simulate_annotation() {
    if (!cfg_.simulated_annotation) throw ConfigError("simulated_annotation is not configured");
    const SimulatedAnnotation& sim = *cfg_.simulated_annotation;
    const auto service = annotation_service();
    const RunState run = load_run(ws_, cfg_.run_id);

    std::vector<const GenerationCandidate*> passed;
    for (const GenerationCandidate& c : run.candidates)
        if (passed_stage1(c)) passed.push_back(&c);
    if (passed.empty()) return {};
    const auto n = static_cast<std::int64_t>(passed.size());
    const auto n_label = std::clamp<std::int64_t>(std::llround(sim.label_fraction * static_cast<double>(n)), 1, n);

    const LabelStore existing(AnnotationService::label_log_path(ws_.root(), cfg_.run_id));
    const auto current = existing.current();
    SimulationStats stats;
    for (std::int64_t k = 0; k < n_label; ++k) {
        const GenerationCandidate& c = *passed[static_cast<std::size_t>(k)];
        const auto truth = simulated_truth(c, ws_.images()->dims(c.image_id));
        if (!truth) continue;
        ++stats.candidates_labeled;
        for (int a = 1; a <= sim.annotators; ++a) {
            const std::string annotator = "sim-" + std::to_string(a);
            if (current.count({c.candidate_id, annotator})) continue;
            HashStream hs(stable_hash({"sim-flip", cfg_.run_id, c.candidate_id, annotator, std::to_string(sim.seed)}));
            const bool flip = hs.uniform() < sim.flip_rate;
            const Label label = flip ? (*truth == Label::accept ? Label::reject : Label::accept) : *truth;
            service->submit_label(cfg_.run_id, c.candidate_id, label, annotator);
            ++stats.records_written;
        }
    }
    return stats;
}

// ----------------------------------------------------------------- stage 2

Stage2Result Pipeline::run_stage2() {
    const RunState run = load_run(ws_, cfg_.run_id);
    const auto service = annotation_service();
    const LabelExport resolved = service->export_labels(cfg_.run_id, cfg_.resolution);
    const LabelExport records = service->export_labels(cfg_.run_id, Resolution::any);

    std::map<std::string, const GenerationCandidate*> by_id;
    for (const GenerationCandidate& c : run.candidates) by_id[c.candidate_id] = &c;

    std::map<std::string, FeatureBundle> cache;
    std::map<std::string, std::string> failures;
    std::vector<LabeledExample> examples;
    std::set<std::string> trained;
    for (const ExportedLabel& e : resolved.examples) {
        const auto it = by_id.find(e.candidate_id);
        if (it == by_id.end()) continue;
        if (failures.count(e.candidate_id)) continue;
        if (!cache.count(e.candidate_id)) {
            const GenerationCandidate& c = *it->second;
            try {
                cache[e.candidate_id] = backends_.features->extract(
                    c.image_id, classifier_crop(c, cfg_.expand_ratio, ws_.images()->dims(c.image_id)));
            } catch (const IoError&) {
                throw;
            } catch (const std::exception& ex) {
                failures[e.candidate_id] = ex.what();
                continue;
            }
        }
        examples.push_back({cache[e.candidate_id], e.label, e.candidate_id});
        trained.insert(e.candidate_id);
    }

    Stage2Result out;
    try {
        TrainResult tr = train(examples, cfg_.train);
        out.checkpoint = {std::move(tr.model), cfg_.train};
        out.report = std::move(tr.report);
    } catch (const ValidationError& e) {
        std::int64_t acc = 0;
        for (const LabeledExample& x : examples) acc += x.label == Label::accept;
        const QueueState q = service->progress(cfg_.run_id, std::nullopt);
        throw ValidationError(std::string(e.what()) + " [" + std::to_string(acc) + " accept / " +
                              std::to_string(static_cast<std::int64_t>(examples.size()) - acc) +
                              " reject examples; queue " + std::to_string(q.labeled) + "/" +
                              std::to_string(q.total) + " labeled, " + std::to_string(q.pending) + " pending]");
    }
    out.examples = examples.size();
    out.ties = resolved.ties;
    for (const auto& [id, msg] : failures) out.feature_failures.push_back(id);

    std::map<std::string, std::pair<int, int>> votes;
    for (const ExportedLabel& r : records.examples) {
        auto& v = votes[r.candidate_id];
        (r.label == Label::accept ? v.first : v.second) += 1;
    }
    json annotations = json::object();
    for (const auto& [id, v] : votes) {
        json resolved_label = nullptr;
        if (v.first != v.second) resolved_label = v.first > v.second ? "accept" : "reject";
        annotations[id] = {{"accept_votes", v.first},
                           {"reject_votes", v.second},
                           {"resolved", resolved_label},
                           {"used_for_training", trained.count(id) > 0}};
    }
    json fails = json::array();
    for (const auto& [id, msg] : failures) fails.push_back({{"candidate_id", id}, {"error", msg}});

    save_checkpoint(ws_.run_file(cfg_.run_id, "model.json"), out.checkpoint);
    write_text_atomic(ws_.run_file(cfg_.run_id, "train_report.json"), json(out.report).dump(2));
    const json stage2 = {{"resolution", to_string(cfg_.resolution)},
                         {"examples", out.examples},
                         {"label_records", records.examples.size()},
                         {"ties", out.ties},
                         {"feature_failures", fails},
                         {"annotations", annotations},
                         {"model_file", "model.json"},
                         {"train_report", out.report}};
    write_text_atomic(ws_.run_file(cfg_.run_id, "stage2.json"), stage2.dump(2));
    return out;
}

// ----------------------------------------------------------------- stage 3

Stage3Stats Pipeline::run_stage3() {
    const fs::path model_path = ws_.run_file(cfg_.run_id, "model.json");
    if (!fs::exists(model_path)) throw NotFoundError("run " + cfg_.run_id + " has no trained model; run stage2-train");
    const Checkpoint ckpt = load_checkpoint(model_path);
    const RunState run = load_run(ws_, cfg_.run_id);

    std::vector<const GenerationCandidate*> todo;
    for (const GenerationCandidate& c : run.candidates)
        if (passed_stage1(c)) todo.push_back(&c);

    struct Decision {
        std::optional<double> probability;
        CandidateState state = CandidateState::rejected;
        std::optional<std::string> reason;
        std::string error;
    };
    std::vector<Decision> decisions(todo.size());
    parallel_for(todo.size(), cfg_.concurrency, [&](std::size_t k) {
        const GenerationCandidate& c = *todo[k];
        Decision& d = decisions[k];
        try {
            const FeatureBundle f = backends_.features->extract(
                c.image_id, classifier_crop(c, cfg_.expand_ratio, ws_.images()->dims(c.image_id)));
            const Prediction p = predict(ckpt.model, f, cfg_.stage3_threshold);
            d.probability = p.probability;
            d.state = p.label == Label::accept ? CandidateState::accepted : CandidateState::rejected;
        } catch (const IoError&) {
            throw;
        } catch (const std::exception& e) {
            d.state = CandidateState::rejected;
            d.reason = "features-unavailable";
            d.error = e.what();
        }
    });

    Stage3Stats stats;
    json out = json::object();
    for (std::size_t k = 0; k < todo.size(); ++k) {
        const Decision& d = decisions[k];
        ++stats.scored;
        if (d.state == CandidateState::accepted) ++stats.accepted;
        else ++stats.rejected;
        if (d.reason) ++stats.features_unavailable;
        json j = {{"probability", d.probability ? json(*d.probability) : json(nullptr)},
                  {"state", to_string(d.state)},
                  {"reason", d.reason ? json(*d.reason) : json(nullptr)}};
        if (!d.error.empty()) j["error"] = d.error;
        out[todo[k]->candidate_id] = std::move(j);
    }
    write_text_atomic(ws_.run_file(cfg_.run_id, "stage3.json"),
                      json{{"threshold", cfg_.stage3_threshold}, {"model_file", "model.json"}, {"decisions", out}}
                          .dump(2));
    return stats;
}

// -------------------------------------------------------------- evaluation

json Pipeline::evaluate(const std::map<std::string, Label>& holdout, const std::string& source) {
    if (holdout.empty()) throw ValidationError("holdout set is empty");
    const fs::path model_path = ws_.run_file(cfg_.run_id, "model.json");
    if (!fs::exists(model_path)) throw NotFoundError("run " + cfg_.run_id + " has no trained model; run stage2-train");
    const Checkpoint ckpt = load_checkpoint(model_path);
    const RunState run = load_run(ws_, cfg_.run_id);
    std::map<std::string, const GenerationCandidate*> by_id;
    for (const GenerationCandidate& c : run.candidates) by_id[c.candidate_id] = &c;

    std::vector<Label> preds;
    std::vector<Label> labels;
    std::size_t unscorable = 0;
    for (const auto& [id, label] : holdout) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw NotFoundError("holdout candidate '" + id + "' is not in run " + cfg_.run_id);
        const GenerationCandidate& c = *it->second;
        Label pred = Label::reject;  // the pipeline never accepts a Stage-1 failure
        if (passed_stage1(c)) {
            try {
                const FeatureBundle f = backends_.features->extract(
                    c.image_id, classifier_crop(c, cfg_.expand_ratio, ws_.images()->dims(c.image_id)));
                pred = predict(ckpt.model, f, cfg_.stage3_threshold).label;
            } catch (const IoError&) {
                throw;
            } catch (const std::exception&) {
                ++unscorable;
            }
        }
        preds.push_back(pred);
        labels.push_back(label);
    }
    const ConfusionCounts counts = confusion(preds, labels);
    const json out = {{"source", source},
                      {"threshold", cfg_.stage3_threshold},
                      {"holdout_size", holdout.size()},
                      {"features_unavailable", unscorable},
                      {"metrics", metrics_json(counts)}};
    write_text_atomic(ws_.run_file(cfg_.run_id, "eval.json"), out.dump(2));
    return out;
}

json Pipeline::evaluate_simulated() {
    if (!cfg_.simulated_annotation) throw ConfigError("simulated_annotation is not configured");
    const RunState run = load_run(ws_, cfg_.run_id);
    std::map<std::string, Label> holdout;
    for (const GenerationCandidate& c : run.candidates) {
        if (!passed_stage1(c) || c.annotation) continue;
        if (const auto t = simulated_truth(c, ws_.images()->dims(c.image_id))) holdout[c.candidate_id] = *t;
    }
    if (holdout.empty()) throw ValidationError("no unannotated Stage-1 passes to evaluate on");
    return evaluate(holdout, "simulated-preference");
}

// -------------------------------------------------------------- manifest

json Pipeline::write_manifest() {
    const RunState run = load_run(ws_, cfg_.run_id);
    const json manifest = build_manifest(run, backends_.identifiers());
    write_text_atomic(ws_.run_file(cfg_.run_id, "manifest.json"), manifest.dump(2));
    write_text_atomic(ws_.run_file(cfg_.run_id, "summary.txt"), manifest_summary(manifest));
    return manifest;
}

json Pipeline::run_all(const Stage1Options& opts) {
    ingest();
    run_stage1(opts);
    if (cfg_.simulated_annotation) simulate_annotation();
    try {
        run_stage2();
    } catch (const EmptyExportError& e) {
        write_manifest();
        throw EmptyExportError(std::string(e.what()) +
                               "; label candidates with annotate-serve (or configure simulated_annotation) "
                               "and rerun");
    } catch (const ValidationError&) {
        write_manifest();
        throw;
    }
    run_stage3();
    if (cfg_.simulated_annotation) evaluate_simulated();
    return write_manifest();
}

}  // namespace curator
