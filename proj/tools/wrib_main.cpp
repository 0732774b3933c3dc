#include "wrib/common.hpp"
#include "wrib/config.hpp"
#include "wrib/data.hpp"
#include "wrib/errors.hpp"
#include "wrib/image_io.hpp"
#include "wrib/lpips.hpp"
#include "wrib/metrics.hpp"
#include "wrib/protocol.hpp"
#include "wrib/training.hpp"

#include <CLI11.hpp>
#include <torch/torch.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace fs = std::filesystem;

namespace {

// Shared in-memory decode cache; panoramic datasets are scanned image by
// image many times during training.
class ImageStore {
public:
    explicit ImageStore(const wrib::DatasetIndex& index, std::size_t cache_cap = 64)
        : cache_cap_(cache_cap) {
        for (const auto& entry : index.entries) {
            entries_.emplace(entry.image_id, entry);
        }
    }

    const wrib::DatasetEntry& entry(const std::string& image_id) const {
        auto it = entries_.find(image_id);
        if (it == entries_.end()) {
            throw wrib::BadImage("unknown image id '" + image_id + "'");
        }
        return it->second;
    }

    // 3xHxW model-range tensor.
    torch::Tensor load(const std::string& image_id) {
        auto it = cache_.find(image_id);
        if (it != cache_.end()) {
            return it->second;
        }
        auto img = wrib::load_image_model(entry(image_id).file_path);
        if (cache_.size() < cache_cap_) {
            cache_.emplace(image_id, img);
        }
        return img;
    }

    // Reconstructs a mined 256x256 crop from its window-qualified id.
    torch::Tensor crop(const std::string& crop_id) {
        const auto parsed = wrib::parse_crop_id(crop_id);
        auto img = wrib::fit_min_size(load(parsed.image_id), wrib::kInputSize, wrib::kInputSize);
        int64_t y = parsed.y;
        int64_t x = parsed.x;
        if (y < 0 || x < 0) { // unqualified id: deterministic center window
            y = (img.size(1) - wrib::kInputSize) / 2;
            x = (img.size(2) - wrib::kInputSize) / 2;
        }
        if (y + wrib::kInputSize > img.size(1) || x + wrib::kInputSize > img.size(2)) {
            throw wrib::BadImage("crop id '" + crop_id + "' is outside image bounds");
        }
        return img.narrow(1, y, wrib::kInputSize).narrow(2, x, wrib::kInputSize).contiguous();
    }

private:
    std::map<std::string, wrib::DatasetEntry> entries_;
    std::map<std::string, torch::Tensor> cache_;
    std::size_t cache_cap_;
};

torch::Tensor load_input_photo(const fs::path& path) {
    auto u8 = wrib::center_crop_square_resize(wrib::load_image_u8(path), wrib::kInputSize);
    return wrib::to_model_range(u8);
}

// Deterministic 256x768 evaluation crop: upscale until the window fits,
// then take the centered window.
torch::Tensor center_panorama_crop(const torch::Tensor& image) {
    auto img = wrib::fit_min_size(image, wrib::kInputSize, wrib::kPanoramaWidth);
    const int64_t y = (img.size(1) - wrib::kInputSize) / 2;
    const int64_t x = (img.size(2) - wrib::kPanoramaWidth) / 2;
    return img.narrow(1, y, wrib::kInputSize).narrow(2, x, wrib::kPanoramaWidth).contiguous();
}

std::vector<std::pair<std::string, torch::Tensor>> sample_mining_crops(
    const wrib::DatasetIndex& index, ImageStore& store, int64_t crops_per_image,
    std::mt19937& rng) {
    std::vector<std::pair<std::string, torch::Tensor>> crops;
    crops.reserve(index.entries.size() * static_cast<std::size_t>(crops_per_image));
    for (const auto& entry : index.entries) {
        auto img = wrib::fit_min_size(store.load(entry.image_id), wrib::kInputSize,
                                      wrib::kInputSize);
        std::uniform_int_distribution<int64_t> dy(0, img.size(1) - wrib::kInputSize);
        std::uniform_int_distribution<int64_t> dx(0, img.size(2) - wrib::kInputSize);
        for (int64_t c = 0; c < crops_per_image; ++c) {
            const int64_t y = dy(rng);
            const int64_t x = dx(rng);
            crops.emplace_back(
                wrib::make_crop_id(entry.image_id, y, x),
                img.narrow(1, y, wrib::kInputSize).narrow(2, x, wrib::kInputSize).contiguous());
        }
    }
    return crops;
}

std::vector<wrib::PairRecord> mine_pairs_for_dataset(const wrib::DatasetIndex& index,
                                                     ImageStore& store,
                                                     const wrib::TrainConfig& config,
                                                     uint64_t seed) {
    std::mt19937 rng(static_cast<uint32_t>(seed));
    auto crops = sample_mining_crops(index, store, config.crops_per_image, rng);

    wrib::Lpips lpips(config.lpips_weights);
    lpips->eval();
    torch::NoGradGuard no_grad;
    auto distance = [&](const torch::Tensor& a, const torch::Tensor& b) {
        return lpips->forward(a.unsqueeze(0), b.unsqueeze(0)).item<double>();
    };
    auto samples = wrib::mine_cross_pairs(crops, config.mining_k, distance);

    std::vector<wrib::PairRecord> records;
    records.reserve(samples.size());
    for (const auto& s : samples) {
        records.push_back(
            wrib::PairRecord{s.source_ids.first, s.source_ids.second, s.lpips_distance});
    }
    return records;
}

struct TrainLog {
    explicit TrainLog(const fs::path& path) : out_(path, std::ios::app) {
        if (!out_) {
            throw wrib::Error("cannot open log file '" + path.string() + "'");
        }
        out_ << "# stage\tstep\tpixel\tfeat_rec\tmrf\tfeat_con\tadv_g\tadv_d\ttotal_g\n";
    }

    void append(wrib::Stage stage, int64_t step, const wrib::LossReport& report) {
        auto cell = [](const std::optional<double>& v) {
            return v ? std::to_string(*v) : std::string("-");
        };
        out_ << wrib::stage_name(stage) << (report.cross ? "-cross" : "") << '\t' << step << '\t'
             << cell(report.pixel) << '\t' << cell(report.feat_rec) << '\t' << cell(report.mrf)
             << '\t' << cell(report.feat_con) << '\t' << cell(report.adv_g) << '\t'
             << cell(report.adv_d) << '\t' << report.total_g << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

int cmd_blend(const fs::path& path_a, const fs::path& path_b, const std::string& checkpoint,
              const std::string& arrangement, bool paste_inputs, const fs::path& output) {
    auto a = load_input_photo(path_a);
    auto b = load_input_photo(path_b);
    auto left = arrangement == "a-right" ? b : a;
    auto right = arrangement == "a-right" ? a : b;

    auto loaded = wrib::load_generator(checkpoint);
    auto panorama = wrib::blend_panorama(loaded.generator, left, right);
    if (paste_inputs) {
        auto thirds = wrib::split_thirds(panorama);
        panorama = torch::cat({left, thirds.mid, right}, -1);
    }
    wrib::save_image_png(output, panorama);
    std::cout << "wrote " << output.string() << " (" << panorama.size(1) << "x"
              << panorama.size(2) << ")\n";
    return 0;
}

int cmd_cyclic(const fs::path& path_a, const fs::path& path_b, const std::string& checkpoint,
               const fs::path& output) {
    auto a = load_input_photo(path_a);
    auto b = load_input_photo(path_b);
    auto loaded = wrib::load_generator(checkpoint);
    auto loop = wrib::cyclic_panorama(loaded.generator, a, b);
    wrib::save_image_png(output, loop);
    std::cout << "wrote " << output.string() << " (" << loop.size(1) << "x" << loop.size(2)
              << ")\n";
    return 0;
}

int cmd_mine_pairs(const fs::path& data_root, const std::string& config_path, fs::path output,
                   uint64_t seed) {
    wrib::TrainConfig config;
    if (!config_path.empty()) {
        config = wrib::TrainConfig::parse_file(config_path);
    }
    config.validate();
    if (output.empty()) {
        output = data_root / "pairs.tsv";
    }
    auto index = wrib::scan_dataset(data_root, "train");
    ImageStore store(index);
    auto records = mine_pairs_for_dataset(index, store, config, seed);
    wrib::write_pair_cache(output, records);
    std::cout << "wrote " << records.size() << " pairs (" << config.mining_k
              << " per crop) to " << output.string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const fs::path& data_root, const fs::path& out_dir,
              const std::string& resume, bool seed_given, uint64_t seed) {
    auto config = wrib::TrainConfig::parse_file(config_path);
    if (seed_given) {
        config.seed = seed;
    }
    config.validate();

    std::unique_ptr<wrib::Trainer> trainer;
    wrib::Stage resume_stage = wrib::Stage::kSelfReconstruction;
    if (!resume.empty()) {
        trainer = wrib::Trainer::from_checkpoint(resume);
        resume_stage = wrib::Trainer::checkpoint_stage(resume);
        auto diffs = trainer->config().diff(config);
        if (!diffs.empty()) {
            std::cerr << "warning: version mismatch between checkpoint and --config; "
                         "keeping the checkpoint's snapshot. Differing fields:\n";
            for (const auto& d : diffs) {
                std::cerr << "  " << d << "\n";
            }
        }
        config = trainer->config();
    } else {
        trainer = std::make_unique<wrib::Trainer>(config);
    }

    auto index = wrib::scan_dataset(data_root, "train");
    auto store = std::make_shared<ImageStore>(index);
    auto rng = std::make_shared<std::mt19937>(static_cast<uint32_t>(config.seed) + 1u);

    auto sample_self = [&, store, rng]() {
        std::uniform_int_distribution<std::size_t> pick(0, index.entries.size() - 1);
        std::vector<torch::Tensor> l, m, r;
        for (int64_t i = 0; i < config.batch_size; ++i) {
            const auto& entry = index.entries[pick(*rng)];
            auto sample =
                wrib::make_self_recon_sample(store->load(entry.image_id), *rng, entry.image_id);
            l.push_back(sample.left);
            m.push_back(sample.mid);
            r.push_back(sample.right);
        }
        wrib::Batch batch;
        batch.left = torch::stack(l);
        batch.mid = torch::stack(m);
        batch.right = torch::stack(r);
        return batch;
    };

    fs::create_directories(out_dir);
    TrainLog log(out_dir / "train_log.tsv");
    auto progress = [&](wrib::Stage stage, int64_t total) {
        return [&, stage, total](int64_t i, const wrib::LossReport& report) {
            log.append(stage, trainer->global_step(), report);
            if ((i + 1) % 50 == 0 || i + 1 == total) {
                std::cout << wrib::stage_name(stage) << " " << (i + 1) << "/" << total
                          << " total_g=" << report.total_g
                          << (report.adv_d ? " adv_d=" + std::to_string(*report.adv_d) : "")
                          << std::endl;
            }
        };
    };

    const int64_t sr_remaining =
        resume_stage == wrib::Stage::kSelfReconstruction
            ? std::max<int64_t>(0, config.iters_sr - trainer->sr_steps())
            : 0;
    if (resume_stage == wrib::Stage::kSelfReconstruction) {
        wrib::RunStageOptions opts;
        opts.iters = sr_remaining;
        opts.checkpoint_every = config.checkpoint_every;
        opts.checkpoint_path = (out_dir / "ckpt_sr.wrib").string();
        opts.on_step = progress(wrib::Stage::kSelfReconstruction, sr_remaining);
        wrib::run_stage(*trainer, wrib::Stage::kSelfReconstruction, sample_self, nullptr, opts);
        std::cout << "self-reconstruction stage done (" << trainer->sr_steps()
                  << " steps); checkpoint " << opts.checkpoint_path << std::endl;
    }

    if (config.iters_ft > 0) {
        const fs::path cache_path = data_root / "pairs.tsv";
        std::vector<wrib::PairRecord> records;
        if (fs::exists(cache_path)) {
            records = wrib::read_pair_cache(cache_path);
            std::cout << "loaded " << records.size() << " cached pairs from "
                      << cache_path.string() << std::endl;
        } else {
            std::cout << "no pair cache found; mining..." << std::endl;
            records = mine_pairs_for_dataset(index, *store, config, config.seed);
            wrib::write_pair_cache(cache_path, records);
            std::cout << "wrote " << records.size() << " pairs to " << cache_path.string()
                      << std::endl;
        }
        if (records.empty()) {
            throw wrib::InsufficientCandidates("pair cache is empty");
        }

        auto sample_cross = [&, store, rng]() {
            std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
            std::vector<torch::Tensor> l, r, real;
            std::uniform_int_distribution<std::size_t> pick_img(0, index.entries.size() - 1);
            for (int64_t i = 0; i < config.batch_size; ++i) {
                const auto& rec = records[pick(*rng)];
                l.push_back(store->crop(rec.query_id));
                r.push_back(store->crop(rec.neighbor_id));
                const auto& entry = index.entries[pick_img(*rng)];
                auto s = wrib::make_self_recon_sample(store->load(entry.image_id), *rng);
                real.push_back(torch::cat({s.left, s.mid, s.right}, 2));
            }
            wrib::Batch batch;
            batch.left = torch::stack(l);
            batch.right = torch::stack(r);
            batch.real = torch::stack(real);
            batch.is_cross = true;
            return batch;
        };

        const int64_t ft_done = trainer->global_step() - trainer->sr_steps();
        const int64_t ft_remaining = std::max<int64_t>(0, config.iters_ft - ft_done);
        wrib::RunStageOptions opts;
        opts.iters = ft_remaining;
        opts.checkpoint_every = config.checkpoint_every;
        opts.checkpoint_path = (out_dir / "ckpt_ft.wrib").string();
        opts.on_step = progress(wrib::Stage::kFineTune, ft_remaining);
        wrib::run_stage(*trainer, wrib::Stage::kFineTune, sample_self, sample_cross, opts);
        std::cout << "fine-tuning stage done; checkpoint " << opts.checkpoint_path << std::endl;
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, const fs::path& data_root,
             const std::string& config_path, const fs::path& output, uint64_t seed) {
    auto loaded = wrib::load_generator(checkpoint);
    std::string inception_weights = loaded.config.inception_weights;
    if (!config_path.empty()) {
        inception_weights = wrib::TrainConfig::parse_file(config_path).inception_weights;
    }

    auto index = wrib::scan_dataset(data_root, "test");
    std::vector<torch::Tensor> real_crops, fake_crops;
    real_crops.reserve(index.entries.size());
    fake_crops.reserve(index.entries.size());
    for (const auto& entry : index.entries) {
        auto real_pano = center_panorama_crop(wrib::load_image_model(entry.file_path));
        auto thirds = wrib::split_thirds(real_pano);
        auto fake_pano = wrib::blend_panorama(loaded.generator, thirds.left, thirds.right);
        real_crops.push_back(wrib::center_crop_eval(real_pano));
        fake_crops.push_back(wrib::center_crop_eval(fake_pano));
    }

    wrib::InceptionV3Features inception(inception_weights);
    auto feats_real = wrib::inception_features(inception, real_crops);
    auto feats_fake = wrib::inception_features(inception, fake_crops);

    const auto n = static_cast<int64_t>(index.entries.size());
    wrib::MetricsReport report;
    report.fid = wrib::compute_fid(feats_real, feats_fake);
    auto kid = wrib::compute_kid(feats_real, feats_fake, wrib::protocol::kKidSubsets,
                                 std::min<int64_t>(wrib::protocol::kKidSubsetSize, n), seed);
    report.kid_mean = kid.mean;
    report.kid_std = kid.std;
    report.n_images = n;
    report.protocol_tag = wrib::protocol::kProtocolTag;

    const auto json = report.to_json();
    std::cout << json << std::endl;
    if (!output.empty()) {
        std::ofstream out(output);
        if (!out) {
            throw wrib::Error("cannot write report '" + output.string() + "'");
        }
        out << json << "\n";
    }
    return 0;
}

bool is_config_or_checkpoint_error(const wrib::Error& e) {
    return dynamic_cast<const wrib::BadConfig*>(&e) != nullptr ||
           dynamic_cast<const wrib::BadCheckpoint*>(&e) != nullptr ||
           dynamic_cast<const wrib::CorruptCheckpoint*>(&e) != nullptr ||
           dynamic_cast<const wrib::VersionMismatch*>(&e) != nullptr ||
           dynamic_cast<const wrib::MissingSRCheckpoint*>(&e) != nullptr;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wide-range image blender: two photos in, one panorama out"};
    app.require_subcommand(1);

    std::string path_a, path_b, checkpoint, config_path, resume;
    std::string arrangement = "a-left";
    std::string output, data_root, out_dir = "runs";
    bool paste_inputs = false;
    uint64_t seed = 0;

    auto* blend = app.add_subcommand("blend", "blend two photos into a 256x768 panorama");
    blend->add_option("path_a", path_a, "first input photo")->required();
    blend->add_option("path_b", path_b, "second input photo")->required();
    blend->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    blend->add_option("--arrangement", arrangement, "which side photo A occupies")
        ->check(CLI::IsMember({"a-left", "a-right"}));
    blend->add_flag("--paste-inputs", paste_inputs,
                    "replace the outer thirds with the resized inputs");
    blend->add_option("--output", output, "output PNG path")->required();
    blend->add_option("--seed", seed, "rng seed");

    auto* cyclic = app.add_subcommand("cyclic", "stitch a 256x1024 wrap-around panorama");
    cyclic->add_option("path_a", path_a, "first input photo")->required();
    cyclic->add_option("path_b", path_b, "second input photo")->required();
    cyclic->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    cyclic->add_option("--output", output, "output PNG path")->required();
    cyclic->add_option("--seed", seed, "rng seed");

    auto* train = app.add_subcommand("train", "run both training stages");
    train->add_option("--config", config_path, "training config file")->required();
    train->add_option("--data", data_root, "dataset root with train/ and test/")->required();
    train->add_option("--out", out_dir, "output directory for checkpoints and logs");
    train->add_option("--checkpoint", resume, "checkpoint to resume from");
    auto* train_seed = train->add_option("--seed", seed, "overrides the config seed");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    eval->add_option("--data", data_root, "dataset root with train/ and test/")->required();
    eval->add_option("--config", config_path, "config override for frozen-net weight paths");
    eval->add_option("--output", output, "also write the JSON report here");
    eval->add_option("--seed", seed, "subset sampling seed");

    auto* mine = app.add_subcommand("mine-pairs", "mine visually close training pairs");
    mine->add_option("--data", data_root, "dataset root with train/ and test/")->required();
    mine->add_option("--config", config_path, "training config file");
    mine->add_option("--output", output, "pair cache path (default <data>/pairs.tsv)");
    mine->add_option("--seed", seed, "crop sampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(blend)) {
            return cmd_blend(path_a, path_b, checkpoint, arrangement, paste_inputs, output);
        }
        if (app.got_subcommand(cyclic)) {
            return cmd_cyclic(path_a, path_b, checkpoint, output);
        }
        if (app.got_subcommand(train)) {
            return cmd_train(config_path, data_root, out_dir, resume, !train_seed->empty(), seed);
        }
        if (app.got_subcommand(eval)) {
            return cmd_eval(checkpoint, data_root, config_path, output, seed);
        }
        if (app.got_subcommand(mine)) {
            return cmd_mine_pairs(data_root, config_path, output, seed);
        }
    } catch (const wrib::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return is_config_or_checkpoint_error(e) ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
