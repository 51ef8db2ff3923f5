#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using qck::cli::run;

namespace {

struct Cli {
    std::ostringstream out, err;
    int operator()(std::vector<std::string> args) {
        out.str("");
        err.str("");
        return run(args, out, err);
    }
};

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qck_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream f(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(f, l);) out.push_back(l);
    return out;
}

// Small synthetic dataset shared by several tests.
fs::path synth(Cli& cli, const std::string& name, int n, int size = 224, int points = 20) {
    const fs::path d = fresh_dir(name);
    EXPECT_EQ(cli({"--seed", "1", "gen", "synth", "--out", d.string(), "--n-images", std::to_string(n), "--points",
                   std::to_string(points), "--width", std::to_string(size), "--height", std::to_string(size)}),
              0)
        << cli.err.str();
    return d;
}

}  // namespace

TEST(Cli, HelpExitsZeroEverywhere) {
    Cli cli;
    for (const auto& args : std::vector<std::vector<std::string>>{{"--help"},
                                                                  {"gen", "--help"},
                                                                  {"gen", "synth", "--help"},
                                                                  {"gen", "targets", "--help"},
                                                                  {"stats", "--help"},
                                                                  {"train", "--help"},
                                                                  {"evaluate", "--help"}})
        EXPECT_EQ(cli(args), 0) << args.back();
    EXPECT_NE(cli.out.str().find("--oracle-gt"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    Cli cli;
    EXPECT_EQ(cli({"stats", "--bogus"}), 2);
    EXPECT_EQ(cli({"frobnicate"}), 2);
    EXPECT_EQ(cli({}), 2);
    EXPECT_EQ(cli({"gen", "synth"}), 2);  // --out is required
}

TEST(Cli, GenSynthIsIdempotent) {
    Cli cli;
    const fs::path d = synth(cli, "synth", 10, 160, 30);
    int pgm = 0, json = 0;
    for (const auto& e : fs::directory_iterator(d)) {
        pgm += e.path().extension() == ".pgm";
        json += e.path().extension() == ".json" && e.path().filename() != "manifest.json";
    }
    EXPECT_EQ(pgm, 10);
    EXPECT_EQ(json, 10);
    const std::string img = slurp(d / "scene_0003.pgm"), ann = slurp(d / "scene_0003.json");
    synth(cli, "synth", 10, 160, 30);
    EXPECT_EQ(slurp(d / "scene_0003.pgm"), img);
    EXPECT_EQ(slurp(d / "scene_0003.json"), ann);
}

TEST(Cli, GenTargetsOneFilePerLevel) {
    Cli cli;
    const fs::path d = synth(cli, "targets", 1);
    const fs::path t = fresh_dir("targets_out");
    ASSERT_EQ(cli({"gen", "targets", "--manifest", (d / "manifest.json").string(), "--out", t.string(), "--levels",
                   "1,2,inf", "--tau", "15"}),
              0)
        << cli.err.str();
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(t)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    EXPECT_EQ(names, (std::vector<std::string>{"scene_0000_L1.qdm", "scene_0000_L2.qdm", "scene_0000_Linf.qdm"}));
    EXPECT_EQ(fs::file_size(t / "scene_0000_L1.qdm"), 16u + 4u * 224 * 224);
}

TEST(Cli, Stats) {
    Cli cli;
    const fs::path d = synth(cli, "stats", 3, 100, 10);
    ASSERT_EQ(cli({"stats", "--manifest", (d / "manifest.json").string()}), 0) << cli.err.str();
    const auto j = nlohmann::json::parse(cli.out.str());
    EXPECT_EQ(j["n_images"], 3);
    EXPECT_EQ(j["n_annotations"], 30);
    EXPECT_DOUBLE_EQ(j["mean_density"].get<double>(), 0.001);
}

TEST(Cli, TrainSmokeAndHistory) {
    Cli cli;
    const fs::path d = synth(cli, "train", 1);
    const fs::path o = fresh_dir("train_out");
    const auto t0 = std::chrono::steady_clock::now();
    ASSERT_EQ(cli({"--threads", "1", "train", "--manifest", (d / "manifest.json").string(), "--out", o.string(),
                   "--epochs", "1"}),
              0)
        << cli.err.str();
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 60.0);
    EXPECT_TRUE(fs::exists(o / "checkpoint.qcp"));
    EXPECT_TRUE(fs::exists(o / "config.json"));
    const auto h = lines(o / "history.csv");
    ASSERT_EQ(h.size(), 3u);
    EXPECT_EQ(h[0].rfind("# config:", 0), 0u);
    EXPECT_EQ(h[1], "epoch,lr,train_loss,val_loss,val_c_mae");
    EXPECT_EQ(h[2].rfind("1,0.001,", 0), 0u);

    // Single-threaded runs are bitwise reproducible.
    const std::string ckpt = slurp(o / "checkpoint.qcp");
    ASSERT_EQ(cli({"--threads", "1", "train", "--manifest", (d / "manifest.json").string(), "--out", o.string(),
                   "--epochs", "1"}),
              0);
    EXPECT_EQ(slurp(o / "checkpoint.qcp"), ckpt);

    // Evaluate the checkpoint.
    const fs::path e = fresh_dir("train_eval");
    ASSERT_EQ(cli({"evaluate", "--manifest", (d / "manifest.json").string(), "--checkpoint",
                   (o / "checkpoint.qcp").string(), "--out", e.string(), "--localize"}),
              0)
        << cli.err.str();
    EXPECT_EQ(lines(e / "metrics.csv").size(), 1u + 1u + 1u);
    EXPECT_EQ(lines(e / "pr_curve.csv").size(), 101u);
}

TEST(Cli, TrainMissingManifestWritesNothing) {
    Cli cli;
    const fs::path o = fresh_dir("train_missing");
    EXPECT_EQ(cli({"train", "--manifest", "/nonexistent/manifest.json", "--out", o.string(), "--epochs", "1"}), 3);
    EXPECT_FALSE(fs::exists(o));
    EXPECT_FALSE(cli.err.str().empty());
}

TEST(Cli, TrainDivergenceHasDistinctExitCode) {
    Cli cli;
    const fs::path d = synth(cli, "diverge", 1);
    const fs::path o = fresh_dir("diverge_out");
    EXPECT_EQ(cli({"train", "--manifest", (d / "manifest.json").string(), "--out", o.string(), "--epochs", "3",
                   "--lr", "1e30"}),
              4)
        << cli.err.str();
    EXPECT_NE(cli.err.str().find("epoch"), std::string::npos) << cli.err.str();
}

TEST(Cli, OracleEvaluationCloses) {
    Cli cli;
    const fs::path d = fresh_dir("oracle");
    ASSERT_EQ(cli({"--seed", "5", "gen", "synth", "--out", d.string(), "--n-images", "4", "--points", "60",
                   "--points-jitter", "20", "--width", "300", "--height", "250", "--layout", "clustered"}),
              0);
    const fs::path e = fresh_dir("oracle_eval");
    ASSERT_EQ(cli({"evaluate", "--manifest", (d / "manifest.json").string(), "--oracle-gt", "--localize", "--out",
                   e.string(), "--at-thresholds", "1,5,10"}),
              0)
        << cli.err.str();
    const auto m = lines(e / "metrics.csv");
    ASSERT_EQ(m.size(), 1u + 4u + 1u);  // header, images, summary
    EXPECT_EQ(m.back().rfind("summary,", 0), 0u);
    const auto s = nlohmann::json::parse(slurp(e / "summary.json"));
    EXPECT_EQ(s["c_mae"].get<double>(), 0.0);
    EXPECT_EQ(s["c_nae"].get<double>(), 0.0);
    EXPECT_NEAR(s["dm_hi"].get<double>(), 1.0, 1e-9);
    EXPECT_EQ(s["l_auc"].get<double>(), 1.0);
    EXPECT_EQ(s["at_thresholds"]["precision"].get<double>(), 1.0);
    const auto pr = lines(e / "pr_curve.csv");
    ASSERT_EQ(pr.size(), 101u);
    for (std::size_t i = 1; i < pr.size(); ++i) EXPECT_EQ(pr[i], std::to_string(i) + ",1,1");
    EXPECT_EQ(cli({"evaluate", "--manifest", (d / "manifest.json").string(), "--oracle-gt", "--localize", "--out",
                   e.string(), "--at-thresholds", "0"}),
              3);
}

TEST(Cli, CheckpointConfigMismatch) {
    Cli cli;
    const fs::path d = synth(cli, "mismatch", 1);
    const fs::path o = fresh_dir("mismatch_out");
    ASSERT_EQ(cli({"train", "--manifest", (d / "manifest.json").string(), "--out", o.string(), "--epochs", "1"}), 0);
    const fs::path cfg = o / "other.json";
    std::ofstream(cfg) << R"({"loss": {"levels": "1,inf", "weights": [1, 1, 1]}})";
    EXPECT_EQ(cli({"--config", cfg.string(), "evaluate", "--manifest", (d / "manifest.json").string(), "--checkpoint",
                   (o / "checkpoint.qcp").string(), "--out", (o / "eval").string()}),
              3);
    EXPECT_NE(cli.err.str().find("mismatch"), std::string::npos) << cli.err.str();
    EXPECT_NE(cli.err.str().find("levels"), std::string::npos) << cli.err.str();
}

TEST(Cli, UnwritableOutputDirectory) {
    Cli cli;
    const fs::path blocker = fresh_dir("blocker");
    std::ofstream(blocker) << "a file, not a directory";
    EXPECT_EQ(cli({"gen", "synth", "--out", (blocker / "sub").string(), "--n-images", "1"}), 3);
    EXPECT_NE(cli.err.str().find("cannot create"), std::string::npos) << cli.err.str();
}

TEST(Cli, BadManifestEntries) {
    Cli cli;
    const fs::path d = fresh_dir("badmanifest");
    fs::create_directories(d);
    std::ofstream(d / "manifest.json") << R"(["missing.json"])";
    EXPECT_EQ(cli({"stats", "--manifest", (d / "manifest.json").string()}), 3);
    std::ofstream(d / "manifest.json") << R"({"not": "an array"})";
    EXPECT_EQ(cli({"stats", "--manifest", (d / "manifest.json").string()}), 3);
}
