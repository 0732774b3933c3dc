#include "wrib/training.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"
#include "wrib/tensor_archive.hpp"

#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace {

class TempFile {
public:
    explicit TempFile(const char* name)
        : path_(std::string(::testing::TempDir()) + "wrib_train_" + name) {
        std::remove(path_.c_str());
    }
    ~TempFile() { std::remove(path_.c_str()); }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

wrib::TrainConfig tiny_config() {
    wrib::TrainConfig c;
    c.bottleneck_channels = 32;
    c.lstm_hidden = 8;
    c.K = 2;
    c.use_attention = false;
    c.disc_channels = 2;
    c.batch_size = 1;
    c.lambda_mrf = 0.0;
    c.seed = 77;
    return c;
}

wrib::Batch self_batch(uint64_t seed) {
    torch::manual_seed(seed);
    wrib::Batch b;
    b.left = torch::rand({1, 3, 256, 256}) * 2 - 1;
    b.mid = torch::rand({1, 3, 256, 256}) * 2 - 1;
    b.right = torch::rand({1, 3, 256, 256}) * 2 - 1;
    return b;
}

wrib::Batch cross_batch(uint64_t seed) {
    torch::manual_seed(seed);
    wrib::Batch b;
    b.left = torch::rand({1, 3, 256, 256}) * 2 - 1;
    b.right = torch::rand({1, 3, 256, 256}) * 2 - 1;
    b.real = torch::rand({1, 3, 256, 768}) * 2 - 1;
    b.is_cross = true;
    return b;
}

TEST(StageNames, RoundTripAndRejectUnknown) {
    EXPECT_STREQ(wrib::stage_name(wrib::Stage::kSelfReconstruction), "sr");
    EXPECT_STREQ(wrib::stage_name(wrib::Stage::kFineTune), "ft");
    EXPECT_EQ(wrib::stage_from_name("sr"), wrib::Stage::kSelfReconstruction);
    EXPECT_EQ(wrib::stage_from_name("ft"), wrib::Stage::kFineTune);
    EXPECT_THROW(wrib::stage_from_name("warmup"), wrib::BadCheckpoint);
}

// The reported term set must track the stage: full objective on any batch
// with a ground-truth middle, reduced subset on cross-image batches.
TEST(TrainerStep, ReportsFollowTheStageAndTheBatchKind) {
    auto config = tiny_config();
    config.lambda_mrf = 0.05;
    wrib::Trainer trainer(config);

    auto sr = trainer.step(self_batch(1), wrib::Stage::kSelfReconstruction);
    EXPECT_TRUE(sr.pixel.has_value());
    EXPECT_TRUE(sr.feat_rec.has_value());
    EXPECT_TRUE(sr.mrf.has_value());
    EXPECT_TRUE(sr.feat_con.has_value());
    EXPECT_TRUE(sr.adv_g.has_value());
    EXPECT_TRUE(sr.adv_d.has_value());
    EXPECT_FALSE(sr.cross);
    EXPECT_TRUE(std::isfinite(sr.total_g));

    auto ft_self = trainer.step(self_batch(2), wrib::Stage::kFineTune);
    EXPECT_TRUE(ft_self.feat_rec.has_value());
    EXPECT_TRUE(ft_self.mrf.has_value());
    EXPECT_FALSE(ft_self.cross);

    auto ft_cross = trainer.step(cross_batch(3), wrib::Stage::kFineTune);
    EXPECT_TRUE(ft_cross.pixel.has_value());
    EXPECT_TRUE(ft_cross.feat_con.has_value());
    EXPECT_TRUE(ft_cross.adv_g.has_value());
    EXPECT_TRUE(ft_cross.adv_d.has_value());
    EXPECT_FALSE(ft_cross.feat_rec.has_value());
    EXPECT_FALSE(ft_cross.mrf.has_value());
    EXPECT_TRUE(ft_cross.cross);
}

TEST(TrainerStep, ZeroWeightsDropTheirTerms) {
    auto config = tiny_config();
    config.lambda_feat_rec = 0.0;
    wrib::Trainer trainer(config);
    auto report = trainer.step(self_batch(4), wrib::Stage::kSelfReconstruction);
    EXPECT_TRUE(report.pixel.has_value());
    EXPECT_FALSE(report.feat_rec.has_value());
    EXPECT_FALSE(report.mrf.has_value()); // tiny config keeps it off
    EXPECT_TRUE(report.feat_con.has_value());
    EXPECT_TRUE(report.adv_g.has_value());
}

TEST(TrainerStep, DisabledAdversaryLeavesTheCriticUntouched) {
    auto config = tiny_config();
    config.lambda_adv = 0.0;
    wrib::Trainer trainer(config);
    std::vector<torch::Tensor> before;
    for (const auto& p : trainer.discriminator()->parameters()) {
        before.push_back(p.clone());
    }
    auto report = trainer.step(self_batch(5), wrib::Stage::kSelfReconstruction);
    EXPECT_FALSE(report.adv_g.has_value());
    EXPECT_FALSE(report.adv_d.has_value());
    auto after = trainer.discriminator()->parameters();
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        EXPECT_TRUE(torch::equal(before[i], after[i]));
    }
}

TEST(TrainerStep, ValidatesItsBatches) {
    wrib::Trainer trainer(tiny_config());
    EXPECT_THROW(trainer.step(cross_batch(6), wrib::Stage::kSelfReconstruction),
                 wrib::StageBatchMismatch);

    auto no_mid = self_batch(7);
    no_mid.mid = torch::Tensor();
    EXPECT_THROW(trainer.step(no_mid, wrib::Stage::kSelfReconstruction), wrib::EmptyBatch);

    // warm up so the fine-tune stage accepts batches at all
    trainer.step(self_batch(8), wrib::Stage::kSelfReconstruction);
    auto no_real = cross_batch(9);
    no_real.real = torch::Tensor();
    EXPECT_THROW(trainer.step(no_real, wrib::Stage::kFineTune), wrib::StageBatchMismatch);

    auto bad_shape = self_batch(10);
    bad_shape.left = torch::rand({1, 3, 128, 256});
    EXPECT_THROW(trainer.step(bad_shape, wrib::Stage::kSelfReconstruction), wrib::ShapeMismatch);
}

// The critic's update consumes the detached panorama: its loss must not
// propagate anything into the generator.
TEST(Trainer, CriticUpdateIsIsolatedFromTheGenerator) {
    wrib::Trainer trainer(tiny_config());
    auto batch = self_batch(11);
    auto out = trainer.generator()->forward(batch.left, batch.right);
    auto real = torch::cat({batch.left, batch.mid, batch.right}, 3);
    auto pair = wrib::ralsgan_losses(trainer.discriminator()->forward(real),
                                     trainer.discriminator()->forward(out.panorama.detach()));
    pair.d_loss.backward();
    for (const auto& p : trainer.generator()->parameters()) {
        EXPECT_FALSE(p.grad().defined());
    }
    bool any_d = false;
    for (const auto& p : trainer.discriminator()->parameters()) {
        any_d = any_d || p.grad().defined();
    }
    EXPECT_TRUE(any_d);
}

TEST(Trainer, SameSeedSameTrajectory) {
    std::vector<wrib::Batch> batches = {self_batch(12), self_batch(13), self_batch(14)};
    auto run = [&] {
        wrib::Trainer trainer(tiny_config());
        for (const auto& b : batches) {
            trainer.step(b, wrib::Stage::kSelfReconstruction);
        }
        std::vector<torch::Tensor> params;
        for (const auto& p : trainer.generator()->parameters()) {
            params.push_back(p.clone());
        }
        for (const auto& p : trainer.discriminator()->parameters()) {
            params.push_back(p.clone());
        }
        return params;
    };
    auto first = run();
    auto second = run();
    ASSERT_EQ(first.size(), second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        EXPECT_TRUE(torch::equal(first[i], second[i])) << i;
    }
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    TempFile first("first.wrib");
    TempFile second("second.wrib");
    wrib::Trainer trainer(tiny_config());
    trainer.step(self_batch(15), wrib::Stage::kSelfReconstruction);
    trainer.step(self_batch(16), wrib::Stage::kSelfReconstruction);
    trainer.save_checkpoint(first.path(), wrib::Stage::kSelfReconstruction);

    auto restored = wrib::Trainer::from_checkpoint(first.path());
    EXPECT_EQ(restored->global_step(), 2);
    EXPECT_EQ(restored->sr_steps(), 2);
    restored->save_checkpoint(second.path(), wrib::Stage::kSelfReconstruction);

    auto a = slurp(first.path());
    auto b = slurp(second.path());
    ASSERT_FALSE(a.empty());
    EXPECT_EQ(a, b);
    EXPECT_EQ(wrib::Trainer::checkpoint_stage(first.path()),
              wrib::Stage::kSelfReconstruction);
}

TEST(Checkpoint, ResumingReproducesTheUninterruptedRun) {
    std::vector<wrib::Batch> batches = {self_batch(17), self_batch(18), self_batch(19),
                                        self_batch(20)};
    wrib::Trainer straight(tiny_config());
    for (const auto& b : batches) {
        straight.step(b, wrib::Stage::kSelfReconstruction);
    }

    TempFile ckpt("resume.wrib");
    wrib::Trainer half(tiny_config());
    half.step(batches[0], wrib::Stage::kSelfReconstruction);
    half.step(batches[1], wrib::Stage::kSelfReconstruction);
    half.save_checkpoint(ckpt.path(), wrib::Stage::kSelfReconstruction);
    auto resumed = wrib::Trainer::from_checkpoint(ckpt.path());
    resumed->step(batches[2], wrib::Stage::kSelfReconstruction);
    resumed->step(batches[3], wrib::Stage::kSelfReconstruction);

    EXPECT_EQ(resumed->global_step(), straight.global_step());
    auto want = straight.generator()->named_parameters();
    auto got = resumed->generator()->named_parameters();
    for (const auto& item : want) {
        EXPECT_TRUE(torch::equal(item.value(), got[item.key()])) << item.key();
    }
    auto want_d = straight.discriminator()->named_parameters();
    auto got_d = resumed->discriminator()->named_parameters();
    for (const auto& item : want_d) {
        EXPECT_TRUE(torch::equal(item.value(), got_d[item.key()])) << item.key();
    }
}

TEST(Checkpoint, RejectsForeignAndCorruptFiles) {
    TempFile foreign("foreign.wrib");
    {
        wrib::TensorArchive archive("some-other-format");
        archive.put_string("meta/config", wrib::TrainConfig{}.serialize());
        archive.put_string("meta/stage", "sr");
        archive.save(foreign.path());
    }
    EXPECT_THROW(wrib::Trainer::from_checkpoint(foreign.path()), wrib::VersionMismatch);
    EXPECT_THROW(wrib::Trainer::checkpoint_stage(foreign.path()), wrib::VersionMismatch);
    EXPECT_THROW(wrib::load_generator(foreign.path()), wrib::VersionMismatch);

    TempFile garbage("garbage.wrib");
    {
        std::ofstream out(garbage.path(), std::ios::binary);
        out << "definitely not a tensor archive";
    }
    EXPECT_THROW(wrib::Trainer::from_checkpoint(garbage.path()), wrib::CorruptCheckpoint);
}

TEST(RunStage, AlternatesCrossBatchesIntoTheFineTuneStage) {
    auto config = tiny_config();
    config.lambda_adv = 0.0;
    wrib::Trainer trainer(config);

    int self_calls = 0, cross_calls = 0;
    auto self_src = [&] {
        ++self_calls;
        return self_batch(21);
    };
    auto cross_src = [&] {
        ++cross_calls;
        auto b = cross_batch(22);
        b.real = torch::Tensor(); // unused with the critic disabled
        return b;
    };

    wrib::RunStageOptions sr_opts;
    sr_opts.iters = 2;
    wrib::run_stage(trainer, wrib::Stage::kSelfReconstruction, self_src, cross_src, sr_opts);
    EXPECT_EQ(self_calls, 2);
    EXPECT_EQ(cross_calls, 0);
    EXPECT_EQ(trainer.sr_steps(), 2);

    std::vector<bool> cross_flags;
    wrib::RunStageOptions ft_opts;
    ft_opts.iters = 5;
    ft_opts.on_step = [&](int64_t, const wrib::LossReport& r) { cross_flags.push_back(r.cross); };
    wrib::run_stage(trainer, wrib::Stage::kFineTune, self_src, cross_src, ft_opts);
    EXPECT_EQ(self_calls, 2 + 3);
    EXPECT_EQ(cross_calls, 2);
    EXPECT_EQ(cross_flags, (std::vector<bool>{false, true, false, true, false}));
}

TEST(RunStage, RefusesColdFineTuningAndWritesAnInitCheckpoint) {
    auto config = tiny_config();
    config.lambda_adv = 0.0;
    wrib::Trainer trainer(config);
    auto src = [] { return self_batch(23); };

    wrib::RunStageOptions ft;
    ft.iters = 1;
    EXPECT_THROW(wrib::run_stage(trainer, wrib::Stage::kFineTune, src, src, ft),
                 wrib::MissingSRCheckpoint);

    TempFile ckpt("init.wrib");
    wrib::RunStageOptions idle;
    idle.iters = 0;
    idle.checkpoint_path = ckpt.path();
    wrib::run_stage(trainer, wrib::Stage::kSelfReconstruction, src, src, idle);
    EXPECT_EQ(wrib::Trainer::checkpoint_stage(ckpt.path()),
              wrib::Stage::kSelfReconstruction);
    auto restored = wrib::Trainer::from_checkpoint(ckpt.path());
    EXPECT_EQ(restored->global_step(), 0);
}

TEST(Trainer, LossDecreasesOnAFixedBatch) {
    auto config = tiny_config();
    config.lambda_adv = 0.0;
    wrib::Trainer trainer(config);
    auto batch = self_batch(24);
    std::vector<double> totals;
    for (int i = 0; i < 40; ++i) {
        totals.push_back(trainer.step(batch, wrib::Stage::kSelfReconstruction).total_g);
    }
    const double head = std::accumulate(totals.begin(), totals.begin() + 10, 0.0) / 10.0;
    const double tail = std::accumulate(totals.end() - 10, totals.end(), 0.0) / 10.0;
    EXPECT_LT(tail, head);
}

TEST(LoadGenerator, ReproducesTheTrainersBlends) {
    TempFile ckpt("gen.wrib");
    wrib::Trainer trainer(tiny_config());
    trainer.step(self_batch(25), wrib::Stage::kSelfReconstruction);
    trainer.save_checkpoint(ckpt.path(), wrib::Stage::kSelfReconstruction);

    auto loaded = wrib::load_generator(ckpt.path());
    EXPECT_EQ(loaded.stage, wrib::Stage::kSelfReconstruction);
    EXPECT_EQ(loaded.config.bottleneck_channels, 32);

    torch::manual_seed(26);
    auto left = torch::rand({3, 256, 256}) * 2 - 1;
    auto right = torch::rand({3, 256, 256}) * 2 - 1;
    auto from_trainer = wrib::blend_panorama(trainer.generator(), left, right);
    auto from_loaded = wrib::blend_panorama(loaded.generator, left, right);
    EXPECT_TRUE(torch::equal(from_trainer, from_loaded));
}

TEST(Inference, BlendIsDeterministicAndCyclicStitchesTheReverseBlend) {
    torch::manual_seed(27);
    wrib::Generator gen(tiny_config());
    auto a = torch::rand({3, 256, 256}) * 2 - 1;
    auto b = torch::rand({3, 256, 256}) * 2 - 1;

    auto p1 = wrib::blend_panorama(gen, a, b);
    auto p2 = wrib::blend_panorama(gen, a, b);
    EXPECT_EQ(p1.sizes(), (std::vector<int64_t>{3, 256, 768}));
    EXPECT_TRUE(torch::equal(p1, p2));

    auto loop = wrib::cyclic_panorama(gen, a, b);
    EXPECT_EQ(loop.sizes(), (std::vector<int64_t>{3, 256, 1024}));
    EXPECT_TRUE(torch::equal(loop.narrow(-1, 0, 768), p1));
    auto reverse = wrib::blend_panorama(gen, b, a);
    EXPECT_TRUE(torch::equal(loop.narrow(-1, 768, 256), wrib::split_thirds(reverse).mid));
}

} // namespace
