#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "blobgan/inversion.hpp"
#include "blobgan/io/checkpoint.hpp"
#include "blobgan/io/config_json.hpp"
#include "blobgan/io/image.hpp"
#include "blobgan/io/scene_document.hpp"
#include "gradcheck.hpp"

namespace {

namespace fs = std::filesystem;
using namespace blobgan;

struct Outcome {
    int code;
    std::string output;
};

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / ("blobgan_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
        nlohmann::json cfg = {{"model", io::to_json(blobgan::testing::tiny_model_config())},
                              {"train", {{"batch", 4}, {"encoder_steps", 40}}}};
        std::ofstream(dir_ / "config.json") << cfg.dump();
        Outcome r = run("train --config " + path("config.json") + " --steps 5 --seed 2 --out " + path("m.blbg") +
                    " --log " + path("train.log"));
        ASSERT_EQ(r.code, 0) << r.output;
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static std::string path(const std::string& name) { return (dir_ / name).string(); }

    static Outcome run(const std::string& args, const std::string& env = "") {
        const std::string cmd = env + " " + BLOBGAN_CLI + " " + args + " 2>&1";
        FILE* pipe = popen(cmd.c_str(), "r");
        std::string out;
        char buf[512];
        while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
        const int status = pclose(pipe);
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
    }

    static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, TrainWritesACompleteCheckpoint) {
    Model m = io::load_checkpoint(path("m.blbg"));
    EXPECT_EQ(m.step, 5);
    EXPECT_EQ(m.encoder_step, 40);
    EXPECT_EQ(m.train.batch, 4);
    EXPECT_GT(m.trunc_mean.numel(), 0);
    std::ifstream log(path("train.log"));
    int lines = 0;
    for (std::string line; std::getline(log, line);) lines += line.find('\t') != std::string::npos;
    EXPECT_EQ(lines, 5 + 40);
}

TEST_F(Cli, SampleTwiceIsByteIdentical) {
    const std::string ck = " --checkpoint " + path("m.blbg");
    ASSERT_EQ(run("sample --seed 1 --out " + path("a") + ck).code, 0);
    ASSERT_EQ(run("sample --seed 1 --out " + path("b") + ck).code, 0);
    EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
    EXPECT_EQ(io::read_file(path("a.png")), io::read_file(path("b.png")));
    ASSERT_EQ(run("sample --seed 1 --truncation 0.5 --out " + path("t") + ck).code, 0);
    EXPECT_NE(io::read_file(path("a.json")), io::read_file(path("t.json")));
}

TEST_F(Cli, CheckpointFromEnvironment) {
    Outcome r = run("sample --seed 3 --out " + path("env"), "BLOBGAN_CHECKPOINT=" + path("m.blbg"));
    EXPECT_EQ(r.code, 0) << r.output;
    EXPECT_TRUE(fs::exists(path("env.png")));
}

TEST_F(Cli, EmptyEditListKeepsTheScene) {
    const std::string ck = " --checkpoint " + path("m.blbg");
    ASSERT_EQ(run("sample --seed 4 --out " + path("s4") + ck).code, 0);
    std::ofstream(path("none.json")) << "[]";
    ASSERT_EQ(run("edit --scene " + path("s4.json") + " --edits " + path("none.json") + " --out " + path("e4")).code, 0);
    EXPECT_EQ(io::read_file(path("s4.json")), io::read_file(path("e4.json")));
    std::ofstream(path("mv.json")) << R"([{"kind": "move", "target": 0, "dx": [0.25, 0]}])";
    ASSERT_EQ(run("edit --scene " + path("s4.json") + " --edits " + path("mv.json") + " --out " + path("m4")).code, 0);
    EXPECT_FLOAT_EQ(io::load_scene(path("m4.json")).blobs[0].x[0], io::load_scene(path("s4.json")).blobs[0].x[0] + 0.25f);
}

TEST_F(Cli, RenderThenInvertBeatsRandomScenes) {
    const std::string ck = " --checkpoint " + path("m.blbg");
    ASSERT_EQ(run("sample --seed 5 --out " + path("s5") + ck).code, 0);
    ASSERT_EQ(run("render --scene " + path("s5.json") + " --out " + path("r5") + ck).code, 0);
    EXPECT_EQ(io::read_file(path("r5.png")), io::read_file(path("s5.png")));
    Outcome inv = run("invert --image " + path("r5.png") + " --out " + path("i5") + ck);
    ASSERT_EQ(inv.code, 0) << inv.output;

    Model m = io::load_checkpoint(path("m.blbg"));
    Tensor image = io::decode_png_rgb(io::read_file(path("r5.png")));
    Tensor recon = render(m, m.g_ema, {io::load_scene(path("i5.json"))}).images.slice(0);
    double best_random = 1e9;
    for (std::uint64_t seed = 1000; seed < 1020; ++seed) {
        Tensor r = render(m, m.g_ema, sample_scenes(m, m.g_ema, {seed})).images.slice(0);
        best_random = std::min(best_random, rmse(r, image));
    }
    EXPECT_LT(rmse(recon, image), best_random);
}

TEST_F(Cli, AutocompleteAndEvalWriteOutputs) {
    const std::string ck = " --checkpoint " + path("m.blbg");
    ASSERT_EQ(run("sample --seed 6 --out " + path("s6") + ck).code, 0);
    BlobScene s = io::load_scene(path("s6.json"));
    nlohmann::json cons = nlohmann::json::array({{{"index", 0}, {"attribute", "psi"}, {"value", s.psi_bg}}});
    std::ofstream(path("cons.json")) << cons.dump();
    Outcome ac = run("autocomplete --constraints " + path("cons.json") + " --seed 6 --out " + path("ac") + ck);
    ASSERT_EQ(ac.code, 0) << ac.output;
    EXPECT_NE(ac.output.find("final_loss = 0\n"), std::string::npos) << ac.output;
    EXPECT_EQ(io::load_scene(path("ac.json")), s);

    Outcome ev = run("eval --samples 20 --out " + path("report.txt") + ck);
    ASSERT_EQ(ev.code, 0) << ev.output;
    const std::string report = io::read_file(path("report.txt"));
    for (const char* key : {"fd_disc = ", "precision = ", "recall = ", "pd_remove = ", "gd = "}) {
        EXPECT_NE(report.find(key), std::string::npos) << key;
    }
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("sample --seed x").code, 2);
    EXPECT_EQ(run("sample --seed 1 --out " + path("x")).code, 2);  // no checkpoint
    Outcome missing = run("sample --checkpoint " + path("nope.blbg") + " --out " + path("x"));
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.output.find("file"), std::string::npos);
    std::ofstream(path("bad.blbg")) << "BLBGxxxx";
    Outcome corrupt = run("sample --checkpoint " + path("bad.blbg") + " --out " + path("x"));
    EXPECT_EQ(corrupt.code, 1);
    EXPECT_NE(corrupt.output.find("version"), std::string::npos) << corrupt.output;
    EXPECT_EQ(run("--help").code, 0);
}

}  // namespace
