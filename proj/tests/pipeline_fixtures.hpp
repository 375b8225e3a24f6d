#pragma once

// Shared scaffolding for orchestrator tests: generated background folders, a
// small-model config and a scripted scoring fixture with a known number of
// Stage-1 passes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curator/json_io.hpp"
#include "curator/mock_backends.hpp"
#include "curator/pipeline/orchestrator.hpp"
#include "test_util.hpp"

namespace curator::test_util {

inline constexpr int kBgWidth = 128;
inline constexpr int kBgHeight = 96;

/// n distinct flat PNG backgrounds named bg-00.png, bg-01.png, ...
inline std::filesystem::path write_backgrounds(const std::filesystem::path& dir, int n) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "bg-%02d.png", i);
        const Bytes png = flat_png(kBgWidth, kBgHeight, static_cast<unsigned char>(20 + 9 * i));
        std::ofstream(dir / name, std::ios::binary).write(reinterpret_cast<const char*>(png.data()),
                                                          static_cast<std::streamsize>(png.size()));
    }
    return dir;
}

/// Hash mocks everywhere, small feature dims and a small classifier so a
/// full run takes well under a second per stage.
inline PipelineConfig small_config(const std::filesystem::path& background_dir, int per_background) {
    PipelineConfig c;
    c.run_id = "run-a";
    c.background_dir = background_dir;
    c.target_class = "dog";
    c.prompt = "a dog standing in the elevator";
    c.roi = {{16, 16, 112, 80}, 40, 32};
    c.candidates_per_background = per_background;
    c.gate_thresholds = {0.5, 3.0, 0.5, 0.3};
    c.backends.fallback.global_dim = 16;
    c.backends.fallback.spatial_dim = 16;
    c.backends.fallback.embed_dim = 32;
    c.master_seed = 7;
    c.concurrency = 3;
    c.train.epochs = 15;
    c.train.early_stop_patience = 5;
    c.train.batch_size = 8;
    c.train.learning_rate = 1e-3;
    c.train.shape = {8, 8, 16, 16, 8, 0.88};
    return c;
}

/// Background ids exactly as ingest will assign them (content hashes in
/// filename order).
inline std::vector<std::string> background_ids(ImageStore& store, const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<std::string> ids;
    for (const auto& f : files) ids.push_back(store.put(read_file(f)));
    return ids;
}

struct ScriptedScoring {
    std::filesystem::path fixture_path;
    std::vector<std::string> intended_pass;  // candidate ids built to pass every gate
    std::vector<std::string> intended_fail;
};

/// Writes a fixture that scores the hash inpainter's images. pass_count of
/// the candidates get values clearly above every threshold; each of the rest
/// misses exactly one gate (cycling through confidence, box placement,
/// aesthetics, caption alignment, no detection and an at-threshold score).
/// Switches detector, aesthetics, captioner and embedder of cfg to the
/// fixture.
inline ScriptedScoring scripted_scoring(const Workspace& ws, PipelineConfig& cfg, int pass_count) {
    using nlohmann::json;
    const auto bgs = background_ids(*ws.images(), cfg.background_dir);
    const HashInpainter inpainter(ws.images(), cfg.backends.spec_for("inpainter").seed);
    const std::string good_caption = "a dog stands in the elevator";
    const std::string bad_caption = "an empty hallway";
    json fx = {{"detect", json::object()},
               {"aesthetic", json::object()},
               {"caption", json::object()},
               {"embed",
                {{cfg.prompt, {1.0, 0.0, 0.0, 0.0}},
                 {good_caption, {0.9, 0.1, 0.0, 0.0}},
                 {bad_caption, {0.0, 0.0, 1.0, 0.0}}}}};
    ScriptedScoring out;
    const int total = static_cast<int>(bgs.size()) * cfg.candidates_per_background;
    int k = 0;
    int fail_kind = 0;
    for (const std::string& bg : bgs) {
        for (int i = 0; i < cfg.candidates_per_background; ++i, ++k) {
            const std::uint64_t seed = candidate_seed(cfg.run_id, bg, i, cfg.master_seed);
            const Box mask = sample_mask_box(cfg.roi, seed);
            const std::string image = inpainter.inpaint(bg, cfg.prompt, mask, seed);
            const std::string cid = make_candidate_id(bg, i);
            // Spread passes over the grid instead of taking a prefix.
            const bool pass = (k * 37) % total < pass_count;
            double conf = 0.95;
            Box box = mask;
            double aes = 6.5;
            std::string caption = good_caption;
            bool detected = true;
            if (!pass) {
                switch (fail_kind++ % 6) {
                    case 0: conf = cfg.gate_thresholds.min_s_det * 0.5; break;
                    case 1: box = {mask.x_min + mask.width(), mask.y_min, mask.x_max + mask.width(), mask.y_max}; break;
                    case 2: aes = cfg.gate_thresholds.min_s_aes - 1.0; break;
                    case 3: caption = bad_caption; break;
                    case 4: detected = false; break;
                    case 5: aes = cfg.gate_thresholds.min_s_aes; break;  // boundary fails
                }
                out.intended_fail.push_back(cid);
            } else {
                out.intended_pass.push_back(cid);
            }
            json dets = json::array();
            if (detected) dets.push_back(json{{"label", cfg.target_class}, {"confidence", conf}, {"box", box}});
            fx["detect"][image + "|" + cfg.target_class] = dets;
            fx["aesthetic"][image] = aes;
            fx["caption"][image] = caption;
        }
    }
    out.fixture_path = ws.root() / "scoring-fixture.json";
    std::ofstream(out.fixture_path) << fx.dump(2);
    BackendSpec scripted;
    scripted.kind = "mock-scripted";
    scripted.fixture = out.fixture_path.string();
    for (const char* s : {"detector", "aesthetic", "captioner", "embedder"}) cfg.backends.overrides[s] = scripted;
    return out;
}

}  // namespace curator::test_util
