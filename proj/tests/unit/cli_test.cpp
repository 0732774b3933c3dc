#include "wrib/data.hpp"
#include "wrib/errors.hpp"
#include "wrib/image_io.hpp"
#include "wrib/training.hpp"

#include <gtest/gtest.h>
#include <torch/torch.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(WRIB_CLI_PATH) + " " + args;
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_photo(const fs::path& path, uint64_t seed) {
    torch::manual_seed(seed);
    auto u8 = torch::randint(0, 256, {256, 256, 3}, torch::kUInt8);
    wrib::save_image_png(path, wrib::to_model_range(u8));
}

std::string tiny_config_text(int64_t iters_sr, int64_t iters_ft) {
    std::ostringstream out;
    out << "bottleneck_channels = 32\n"
        << "lstm_hidden = 8\n"
        << "K = 2\n"
        << "use_attention = false\n"
        << "disc_channels = 2\n"
        << "batch_size = 1\n"
        << "lambda_mrf = 0\n"
        << "iters_sr = " << iters_sr << "\n"
        << "iters_ft = " << iters_ft << "\n"
        << "checkpoint_every = 2\n"
        << "crops_per_image = 1\n"
        << "mining_k = 1\n"
        << "seed = 5\n";
    return out.str();
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ws_ = fs::temp_directory_path() / "wrib_cli_ws";
        fs::remove_all(ws_);
        fs::create_directories(ws_ / "data" / "train");
        fs::create_directories(ws_ / "data" / "test");
        for (int i = 0; i < 6; ++i) {
            write_photo(ws_ / "data" / "train" / ("tr" + std::to_string(i) + ".png"), 100 + i);
        }
        for (int i = 0; i < 4; ++i) {
            write_photo(ws_ / "data" / "test" / ("te" + std::to_string(i) + ".png"), 200 + i);
        }
        write_photo(ws_ / "a.png", 301);
        write_photo(ws_ / "b.png", 302);
        std::ofstream(ws_ / "tiny.cfg") << tiny_config_text(2, 2);
        std::ofstream(ws_ / "zero.cfg") << tiny_config_text(0, 0);
        std::ofstream(ws_ / "bad.png") << "not an image at all";

        init_rc_ = run("train --config " + (ws_ / "zero.cfg").string() + " --data " +
                       (ws_ / "data").string() + " --out " + (ws_ / "init").string() +
                       " > /dev/null 2>&1");
    }

    static void TearDownTestSuite() { fs::remove_all(ws_); }

    static std::string init_ckpt() { return (ws_ / "init" / "ckpt_sr.wrib").string(); }

    static fs::path ws_;
    static int init_rc_;
};

fs::path CliTest::ws_;
int CliTest::init_rc_ = -1;

TEST_F(CliTest, HelpSucceedsAndBadUsageExitsTwo) {
    EXPECT_EQ(run("--help > /dev/null 2>&1"), 0);
    EXPECT_EQ(run("blend > /dev/null 2>&1"), 2);
    EXPECT_EQ(run("frobnicate > /dev/null 2>&1"), 2);
}

TEST_F(CliTest, ZeroIterationTrainingWritesALoadableInitialCheckpoint) {
    ASSERT_EQ(init_rc_, 0);
    ASSERT_TRUE(fs::exists(init_ckpt()));
    EXPECT_EQ(wrib::Trainer::checkpoint_stage(init_ckpt()), wrib::Stage::kSelfReconstruction);
    auto loaded = wrib::load_generator(init_ckpt());
    EXPECT_EQ(loaded.config.bottleneck_channels, 32);
}

TEST_F(CliTest, BlendWritesADeterministicPanorama) {
    ASSERT_EQ(init_rc_, 0);
    const std::string base = " " + (ws_ / "a.png").string() + " " + (ws_ / "b.png").string() +
                             " --checkpoint " + init_ckpt() + " --output ";
    ASSERT_EQ(run("blend" + base + (ws_ / "out1.png").string() + " > /dev/null 2>&1"), 0);
    auto image = wrib::load_image_u8(ws_ / "out1.png");
    EXPECT_EQ(image.sizes(), (std::vector<int64_t>{256, 768, 3}));

    ASSERT_EQ(run("blend" + base + (ws_ / "out2.png").string() + " > /dev/null 2>&1"), 0);
    EXPECT_EQ(slurp(ws_ / "out1.png"), slurp(ws_ / "out2.png"));
}

TEST_F(CliTest, PasteInputsHonorsTheArrangement) {
    ASSERT_EQ(init_rc_, 0);
    auto a = wrib::load_image_u8(ws_ / "a.png");
    auto b = wrib::load_image_u8(ws_ / "b.png");
    const std::string base = " " + (ws_ / "a.png").string() + " " + (ws_ / "b.png").string() +
                             " --checkpoint " + init_ckpt() + " --paste-inputs ";

    ASSERT_EQ(run("blend" + base + "--arrangement a-left --output " +
                  (ws_ / "pl.png").string() + " > /dev/null 2>&1"),
              0);
    auto left_first = wrib::load_image_u8(ws_ / "pl.png");
    EXPECT_TRUE(torch::equal(left_first.narrow(1, 0, 256), a));
    EXPECT_TRUE(torch::equal(left_first.narrow(1, 512, 256), b));

    ASSERT_EQ(run("blend" + base + "--arrangement a-right --output " +
                  (ws_ / "pr.png").string() + " > /dev/null 2>&1"),
              0);
    auto right_first = wrib::load_image_u8(ws_ / "pr.png");
    EXPECT_TRUE(torch::equal(right_first.narrow(1, 0, 256), b));
    EXPECT_TRUE(torch::equal(right_first.narrow(1, 512, 256), a));
}

TEST_F(CliTest, CyclicCoversTheFullLoop) {
    ASSERT_EQ(init_rc_, 0);
    ASSERT_EQ(run("cyclic " + (ws_ / "a.png").string() + " " + (ws_ / "b.png").string() +
                  " --checkpoint " + init_ckpt() + " --output " + (ws_ / "loop.png").string() +
                  " > /dev/null 2>&1"),
              0);
    auto image = wrib::load_image_u8(ws_ / "loop.png");
    EXPECT_EQ(image.sizes(), (std::vector<int64_t>{256, 1024, 3}));
}

TEST_F(CliTest, UnusableInputsExitTwo) {
    ASSERT_EQ(init_rc_, 0);
    const std::string tail = " --checkpoint " + init_ckpt() + " --output " +
                             (ws_ / "never.png").string() + " > /dev/null 2>&1";
    EXPECT_EQ(run("blend " + (ws_ / "missing.png").string() + " " + (ws_ / "b.png").string() +
                  tail),
              2);
    EXPECT_EQ(run("blend " + (ws_ / "bad.png").string() + " " + (ws_ / "b.png").string() + tail),
              2);
}

TEST_F(CliTest, BadCheckpointsAndConfigsExitThree) {
    EXPECT_EQ(run("blend " + (ws_ / "a.png").string() + " " + (ws_ / "b.png").string() +
                  " --checkpoint " + (ws_ / "no-such.wrib").string() + " --output " +
                  (ws_ / "never.png").string() + " > /dev/null 2>&1"),
              3);
    std::ofstream(ws_ / "corrupt.wrib") << "garbage";
    EXPECT_EQ(run("blend " + (ws_ / "a.png").string() + " " + (ws_ / "b.png").string() +
                  " --checkpoint " + (ws_ / "corrupt.wrib").string() + " --output " +
                  (ws_ / "never.png").string() + " > /dev/null 2>&1"),
              3);

    std::ofstream(ws_ / "unknown.cfg") << "no_such_knob = 1\n";
    EXPECT_EQ(run("train --config " + (ws_ / "unknown.cfg").string() + " --data " +
                  (ws_ / "data").string() + " --out " + (ws_ / "never").string() +
                  " > /dev/null 2>&1"),
              3);
    std::ofstream(ws_ / "invalid.cfg") << "bottleneck_channels = 100\n";
    EXPECT_EQ(run("train --config " + (ws_ / "invalid.cfg").string() + " --data " +
                  (ws_ / "data").string() + " --out " + (ws_ / "never").string() +
                  " > /dev/null 2>&1"),
              3);
}

TEST_F(CliTest, TwoStageTrainingWritesCheckpointsLogsAndThePairCache) {
    ASSERT_EQ(init_rc_, 0);
    ASSERT_EQ(run("train --config " + (ws_ / "tiny.cfg").string() + " --data " +
                  (ws_ / "data").string() + " --out " + (ws_ / "full").string() +
                  " > /dev/null 2>&1"),
              0);
    EXPECT_TRUE(fs::exists(ws_ / "full" / "ckpt_sr.wrib"));
    ASSERT_TRUE(fs::exists(ws_ / "full" / "ckpt_ft.wrib"));
    EXPECT_TRUE(fs::exists(ws_ / "data" / "pairs.tsv"));
    EXPECT_EQ(wrib::Trainer::checkpoint_stage((ws_ / "full" / "ckpt_ft.wrib").string()),
              wrib::Stage::kFineTune);

    // the cross step's report row must blank the self-only terms
    std::ifstream log(ws_ / "full" / "train_log.tsv");
    ASSERT_TRUE(log.good());
    std::string line;
    bool saw_cross = false;
    while (std::getline(log, line)) {
        if (line.rfind("ft-cross\t", 0) != 0) {
            continue;
        }
        saw_cross = true;
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, '\t')) {
            cells.push_back(cell);
        }
        ASSERT_GE(cells.size(), 9u) << line;
        EXPECT_NE(cells[2], "-") << line; // pixel
        EXPECT_EQ(cells[3], "-") << line; // feat_rec
        EXPECT_EQ(cells[4], "-") << line; // mrf
        EXPECT_NE(cells[5], "-") << line; // feat_con
    }
    EXPECT_TRUE(saw_cross);
}

TEST_F(CliTest, EvalEmitsAProtocolTaggedReport) {
    ASSERT_EQ(init_rc_, 0);
    ASSERT_EQ(run("eval --checkpoint " + init_ckpt() + " --data " + (ws_ / "data").string() +
                  " --output " + (ws_ / "report.json").string() + " > /dev/null 2>&1"),
              0);
    auto report = slurp(ws_ / "report.json");
    EXPECT_NE(report.find("\"n_images\": 4"), std::string::npos) << report;
    EXPECT_NE(report.find("scenery-center512-v1"), std::string::npos) << report;
    EXPECT_NE(report.find("\"fid\""), std::string::npos) << report;
}

TEST_F(CliTest, MinePairsExcludesTheQuerysOwnImage) {
    ASSERT_EQ(init_rc_, 0);
    ASSERT_EQ(run("mine-pairs --data " + (ws_ / "data").string() + " --config " +
                  (ws_ / "tiny.cfg").string() + " --output " + (ws_ / "pairs2.tsv").string() +
                  " > /dev/null 2>&1"),
              0);
    auto records = wrib::read_pair_cache(ws_ / "pairs2.tsv");
    // 6 images x 1 crop each, k = 1 neighbor per crop
    ASSERT_EQ(records.size(), 6u);
    for (const auto& r : records) {
        EXPECT_NE(wrib::parse_crop_id(r.query_id).image_id,
                  wrib::parse_crop_id(r.neighbor_id).image_id);
        EXPECT_GE(r.distance, 0.0);
    }
}

TEST_F(CliTest, ResumingWithAChangedConfigWarnsAndKeepsTheCheckpoint) {
    ASSERT_EQ(init_rc_, 0);
    std::ofstream(ws_ / "changed.cfg") << tiny_config_text(0, 0) << "lr_g = 0.00033\n";
    ASSERT_EQ(run("train --config " + (ws_ / "changed.cfg").string() + " --data " +
                  (ws_ / "data").string() + " --out " + (ws_ / "resume").string() +
                  " --checkpoint " + init_ckpt() + " > /dev/null 2> " +
                  (ws_ / "resume_err.txt").string()),
              0);
    auto err = slurp(ws_ / "resume_err.txt");
    EXPECT_NE(err.find("keeping the checkpoint's snapshot"), std::string::npos) << err;
    EXPECT_NE(err.find("lr_g"), std::string::npos) << err;

    auto resumed = wrib::load_generator((ws_ / "resume" / "ckpt_sr.wrib").string());
    EXPECT_EQ(resumed.config.lr_g, 0.0001); // the checkpoint's value, not the new file's
}

} // namespace
