#ifndef WRIB_CONFIG_HPP
#define WRIB_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wrib {

// All knobs of the training recipe and of the model geometry. The file
// format is plain "key = value" text, one pair per line, '#' comments.
struct TrainConfig {
    // loss weights
    double lambda_pixel = 5.0;
    double lambda_feat_rec = 1.0;
    double lambda_mrf = 0.05;
    double lambda_feat_con = 1.0;
    double lambda_adv = 0.01;

    // optimization
    double lr_g = 1e-4;
    double lr_d = 4e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    int64_t batch_size = 4;
    int64_t iters_sr = 200000;
    int64_t iters_ft = 100000;
    int64_t checkpoint_every = 1000;
    uint64_t seed = 0;

    // model geometry
    int64_t bottleneck_channels = 1024; // divisible by 32
    int64_t lstm_hidden = 0;            // 0 -> same as bottleneck_channels
    int64_t K = 4;                      // sub-feature slices per side
    int64_t attention_level = 8;        // pyramid factor: 2, 4, 8 or 16
    bool use_attention = true;
    int64_t disc_channels = 64;

    // pair mining
    int64_t crops_per_image = 4;
    int64_t mining_k = 3;

    // optional pretrained weight archives (empty -> seeded random init)
    std::string vgg_weights;
    std::string lpips_weights;
    std::string inception_weights;

    int64_t effective_lstm_hidden() const {
        return lstm_hidden > 0 ? lstm_hidden : bottleneck_channels;
    }

    void validate() const; // throws BadConfig on violated invariants

    static TrainConfig parse_file(const std::filesystem::path& path);
    static TrainConfig parse_text(const std::string& text);

    // Canonical sorted "key = value" rendering; used as the checkpoint's
    // config snapshot.
    std::string serialize() const;

    // Human-readable list of fields that differ from `other` (empty when
    // the snapshots match).
    std::vector<std::string> diff(const TrainConfig& other) const;
};

} // namespace wrib

#endif // WRIB_CONFIG_HPP
