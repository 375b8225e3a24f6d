#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "pipeline_fixtures.hpp"

using namespace curator;
using namespace curator::test_util;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(CURATOR_CLI) + " " + args + " 2>&1";
    FILE* p = ::popen(cmd.c_str(), "r");
    Result r;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

struct CliEnv {
    fs::path root;
    fs::path config;
    std::string base;  // --config ... --workspace ...
};

CliEnv make_cli_env(const std::string& name, bool simulate) {
    const fs::path root = fresh_dir(name);
    write_backgrounds(root / "backgrounds", 4);
    json cfg = small_config("backgrounds", 6);  // relative to the config file
    if (simulate) cfg["simulated_annotation"] = {{"annotators", 3}, {"flip_rate", 0.0}, {"label_fraction", 0.6}};
    const fs::path path = root / "config.json";
    std::ofstream(path) << cfg.dump(2);
    return {root, path, "--config " + path.string() + " --workspace " + (root / "ws").string()};
}

}  // namespace

TEST(Cli, RunAllThenInspect) {
    const CliEnv e = make_cli_env("cli-runall", true);
    const Result r = run(e.base + " run-all");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("stage counts"), std::string::npos);

    const Result show = run(e.base + " manifest show");
    EXPECT_EQ(show.code, 0) << show.out;
    EXPECT_NE(show.out.find("score distributions"), std::string::npos);

    const Result as_json = run(e.base + " manifest show --json");
    ASSERT_EQ(as_json.code, 0) << as_json.out;
    const json m = json::parse(as_json.out);
    EXPECT_EQ(m["schema_version"], 1);
    EXPECT_EQ(m["statistics"]["generated"], 24);
}

TEST(Cli, EvalReadsIdToLabelFile) {
    CliEnv e = make_cli_env("cli-eval", true);
    ASSERT_EQ(run(e.base + " run-all").code, 0);
    const json m = json::parse(run(e.base + " manifest show --json").out);
    json labels = json::object();
    for (const json& c : m["candidates"]) labels[c["candidate_id"].get<std::string>()] = "accept";
    std::ofstream(e.root / "holdout.json") << labels.dump();
    const Result r = run(e.base + " eval --labels " + (e.root / "holdout.json").string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("precision"), std::string::npos);
    EXPECT_NE(r.out.find("24 candidates"), std::string::npos);
}

TEST(Cli, OverridesApplyAndBadOnesFail) {
    const CliEnv e = make_cli_env("cli-set", false);
    const Result ok = run(e.base + " --set candidates_per_background=2 stage1");
    ASSERT_EQ(ok.code, 0) << ok.out;
    EXPECT_NE(ok.out.find("8 candidates"), std::string::npos) << ok.out;

    const Result bad = run(e.base + " --set candidates_per_background=0 stage1");
    EXPECT_EQ(bad.code, 2) << bad.out;
    EXPECT_NE(bad.out.find("candidates_per_background"), std::string::npos) << bad.out;
}

TEST(Cli, ExitCodesReflectErrorKinds) {
    const CliEnv e = make_cli_env("cli-codes", false);
    EXPECT_EQ(run(e.base + " stage3").code, 3);  // nothing trained
    ASSERT_EQ(run(e.base + " stage1").code, 0);
    const Result no_labels = run(e.base + " stage2-train");
    EXPECT_EQ(no_labels.code, 4) << no_labels.out;
    EXPECT_EQ(run("--config " + (e.root / "missing.json").string() + " ingest").code, 2);
    EXPECT_NE(run("no-such-command").code, 0);
    EXPECT_EQ(run("--help").code, 0);
}
