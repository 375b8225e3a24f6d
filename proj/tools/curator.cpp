// Command-line front end for the curation pipeline.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "curator/annotation.hpp"
#include "curator/errors.hpp"
#include "curator/http_backends.hpp"
#include "curator/metrics.hpp"
#include "curator/pipeline/manifest.hpp"
#include "curator/pipeline/orchestrator.hpp"

namespace {

using namespace curator;
using nlohmann::json;

enum Exit { ok = 0, failure = 1, usage = 2, not_found = 3, invalid = 4 };

struct Globals {
    std::string config;
    std::string workspace = "workspace";
    std::vector<std::string> overrides;
    std::string run_id;
};

PipelineConfig config_from(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required");
    std::vector<std::string> overrides = g.overrides;
    if (!g.run_id.empty()) overrides.push_back("run_id=\"" + g.run_id + "\"");
    return load_config(g.config, overrides);
}

Pipeline pipeline_from(const Globals& g) { return Pipeline(Workspace(g.workspace), config_from(g)); }

int port_from(std::optional<int> flag, int fallback) {
    if (flag) return *flag;
    if (const char* env = std::getenv("CURATOR_PORT")) {
        try {
            return std::stoi(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("CURATOR_PORT is not a port number: ") + env);
        }
    }
    return fallback;
}

/// Servers run on background threads; the process ends on a signal.
[[noreturn]] void serve_forever() {
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

void print_stage1(const Stage1Stats& s) {
    std::printf("stage1: %zu candidates, %zu processed, %zu already done; %zu passed, %zu failed, %zu incomplete\n",
                s.total, s.processed, s.skipped, s.passed, s.failed, s.incomplete);
    if (s.incomplete > 0) std::printf("stage1: rerun with --retry-incomplete to retry backend failures\n");
}

void print_stage2(const Stage2Result& r) {
    const EpochStats& best = r.report.best();
    std::printf("stage2: %zu examples (%zu train / %zu val), %zu ties, %zu without features\n", r.examples,
                r.report.n_train, r.report.n_val, r.ties.size(), r.feature_failures.size());
    std::printf("stage2: best epoch %d of %zu, val P %.4f R %.4f F1 %.4f%s\n", r.report.best_epoch,
                r.report.epochs.size(), best.val_precision, best.val_recall, best.val_f1,
                r.report.stopped_early ? " (stopped early)" : "");
}

void print_stage3(const Stage3Stats& s) {
    std::printf("stage3: scored %zu, accepted %zu, rejected %zu (%zu without features)\n", s.scored, s.accepted,
                s.rejected, s.features_unavailable);
}

void print_eval(const json& e) {
    const json& m = e.at("metrics");
    const ConfusionCounts c{m.at("tp").get<std::int64_t>(), m.at("fp").get<std::int64_t>(),
                            m.at("tn").get<std::int64_t>(), m.at("fn").get<std::int64_t>()};
    std::printf("evaluation on %s (%zu candidates)\n", e.at("source").get<std::string>().c_str(),
                e.at("holdout_size").get<std::size_t>());
    std::cout << metrics_table(c);
}

int run(int argc, char** argv) {
    CLI::App app{"Two-stage image curation pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("-c,--config", g.config, "Pipeline config (JSON)");
    app.add_option("-w,--workspace", g.workspace, "Workspace directory")->capture_default_str();
    app.add_option("-s,--set", g.overrides, "Override a config value: dotted.key=value (repeatable)");
    app.add_option("--run-id", g.run_id, "Override run_id");

    auto* ingest = app.add_subcommand("ingest", "Register background images");

    Stage1Options s1;
    std::size_t stop_after = 0;
    auto* stage1 = app.add_subcommand("stage1", "Generate and gate candidates");
    stage1->add_flag("--retry-incomplete", s1.retry_incomplete, "Reprocess candidates that hit backend failures");
    stage1->add_option("--stop-after", stop_after, "Process at most N new candidates");

    std::string host = "127.0.0.1";
    std::optional<int> port;
    std::string cors = "*";
    auto* serve = app.add_subcommand("annotate-serve", "Serve the annotation API");
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "Port (default $CURATOR_PORT, else 8080; 0 picks a free port)");
    serve->add_option("--cors-origin", cors)->capture_default_str();

    auto* stage2 = app.add_subcommand("stage2-train", "Train the preference classifier from labels");
    auto* stage3 = app.add_subcommand("stage3", "Score Stage-1 passes with the classifier");

    Stage1Options all_opts;
    auto* run_all = app.add_subcommand("run-all", "Run every stage, resuming completed work");
    run_all->add_flag("--retry-incomplete", all_opts.retry_incomplete);

    std::string labels;
    auto* eval = app.add_subcommand("eval", "Metrics of the trained classifier on a labeled holdout");
    eval->add_option("--labels", labels, "Holdout labels (export JSON, array, object or JSONL)")->required();

    bool as_json = false;
    auto* manifest = app.add_subcommand("manifest", "Inspect a run manifest");
    manifest->require_subcommand(1);
    auto* show = manifest->add_subcommand("show", "Print the manifest summary");
    show->add_flag("--json", as_json, "Print the full manifest");

    std::optional<int> mock_port;
    std::string mock_host = "127.0.0.1";
    auto* mock = app.add_subcommand("mock-serve", "Serve hash mock backends over the model wire protocol");
    mock->add_option("--host", mock_host)->capture_default_str();
    mock->add_option("--port", mock_port, "Port (default $CURATOR_PORT, else 8090)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (ingest->parsed()) {
        auto p = pipeline_from(g);
        const auto bgs = p.ingest();
        std::printf("ingest: %zu backgrounds registered for run %s\n", bgs.size(), p.config().run_id.c_str());
    } else if (stage1->parsed()) {
        if (stop_after > 0) s1.stop_after = stop_after;
        print_stage1(pipeline_from(g).run_stage1(s1));
    } else if (serve->parsed()) {
        auto p = pipeline_from(g);
        AnnotationServer server(p.annotation_service(), {cors});
        const int bound = server.start(host, port_from(port, 8080));
        std::printf("annotation API on http://%s:%d/api/v1 (run %s)\n", host.c_str(), bound,
                    p.config().run_id.c_str());
        std::fflush(stdout);
        serve_forever();
    } else if (stage2->parsed()) {
        print_stage2(pipeline_from(g).run_stage2());
    } else if (stage3->parsed()) {
        print_stage3(pipeline_from(g).run_stage3());
    } else if (run_all->parsed()) {
        auto p = pipeline_from(g);
        const json m = p.run_all(all_opts);
        std::cout << manifest_summary(m);
        std::printf("manifest: %s\n", p.workspace().run_file(p.config().run_id, "manifest.json").c_str());
    } else if (eval->parsed()) {
        print_eval(pipeline_from(g).evaluate(load_holdout_labels(labels), labels));
    } else if (show->parsed()) {
        const PipelineConfig cfg = config_from(g);
        const json m = load_manifest(Workspace(g.workspace).run_file(cfg.run_id, "manifest.json"));
        if (as_json) std::cout << m.dump(2) << "\n";
        else std::cout << manifest_summary(m);
    } else if (mock->parsed()) {
        Workspace ws(g.workspace);
        BackendsConfig backends;
        if (!g.config.empty()) backends = config_from(g).backends;
        ModelServer server(make_backends(backends, ws.images()));
        const int bound = server.start(mock_host, port_from(mock_port, 8090));
        std::printf("mock model services on http://%s:%d\n", mock_host.c_str(), bound);
        std::fflush(stdout);
        serve_forever();
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const curator::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return usage;
    } catch (const curator::NotFoundError& e) {
        std::fprintf(stderr, "not found: %s\n", e.what());
        return not_found;
    } catch (const curator::EmptyExportError& e) {
        std::fprintf(stderr, "no labels: %s\n", e.what());
        return invalid;
    } catch (const curator::ValidationError& e) {
        std::fprintf(stderr, "invalid: %s\n", e.what());
        return invalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return failure;
    }
}
