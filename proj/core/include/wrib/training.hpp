#ifndef WRIB_TRAINING_HPP
#define WRIB_TRAINING_HPP

#include <torch/torch.h>

#include "wrib/config.hpp"
#include "wrib/discriminator.hpp"
#include "wrib/generator.hpp"
#include "wrib/vgg.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace wrib {

enum class Stage {
    kSelfReconstruction, // ground-truth middle available, full objective
    kFineTune,           // mixes self batches with cross-image pairs
};

const char* stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

struct Batch {
    torch::Tensor left;  // N x 3 x 256 x 256
    torch::Tensor right; // N x 3 x 256 x 256
    torch::Tensor mid;   // N x 3 x 256 x 256; undefined when is_cross
    torch::Tensor real;  // N x 3 x 256 x 768 reference crops for the critic;
                         // for self batches defaults to [left|mid|right]
    bool is_cross = false;
};

// Unweighted loss terms of one step; a term is set only when the stage
// and the configured weights make it part of the objective.
struct LossReport {
    std::optional<double> pixel;
    std::optional<double> feat_rec;
    std::optional<double> mrf;
    std::optional<double> feat_con;
    std::optional<double> adv_g;
    std::optional<double> adv_d;
    double total_g = 0.0;
    bool cross = false;
};

// Owns the generator, discriminator, frozen VGG and both Adam optimizers;
// executes one alternating D/G update per step. Loss terms participate
// only when the stage admits them and their weight is positive.
class Trainer {
public:
    explicit Trainer(const TrainConfig& config, torch::Device device = torch::kCPU);

    LossReport step(const Batch& batch, Stage stage);

    Generator& generator() { return generator_; }
    Discriminator& discriminator() { return discriminator_; }
    Vgg19Features& vgg() { return vgg_; }
    const TrainConfig& config() const { return config_; }
    int64_t global_step() const { return global_step_; }
    int64_t sr_steps() const { return sr_steps_; }

    void save_checkpoint(const std::string& path, Stage stage) const;

    // Rebuilds a trainer from a checkpoint, including optimizer state;
    // a save immediately after loading reproduces the file byte for byte.
    static std::unique_ptr<Trainer> from_checkpoint(const std::string& path,
                                                    torch::Device device = torch::kCPU);

    static Stage checkpoint_stage(const std::string& path);

private:
    torch::Tensor generator_objective(const Batch& batch, Stage stage,
                                      const GeneratorOutput& out, LossReport& report);

    TrainConfig config_;
    torch::Device device_;
    Generator generator_{nullptr};
    Discriminator discriminator_{nullptr};
    Vgg19Features vgg_{nullptr};
    std::unique_ptr<torch::optim::Adam> opt_g_, opt_d_;
    int64_t global_step_ = 0;
    int64_t sr_steps_ = 0;
};

// Supplies one batch per call; owns its sampling state.
using BatchSource = std::function<Batch()>;

struct RunStageOptions {
    int64_t iters = 0;
    int64_t checkpoint_every = 1000;
    std::string checkpoint_path; // written on the cadence and at the end; empty -> never
    std::function<void(int64_t, const LossReport&)> on_step;
};

// Drives one stage: self-reconstruction consumes `self_source` only; the
// fine-tuning stage alternates self and cross batches 1:1, self first.
// Fine-tuning with iters > 0 requires a trainer warmed by a completed
// self-reconstruction run and throws MissingSRCheckpoint otherwise. A
// checkpoint is written even for iters = 0 (the initialization state).
void run_stage(Trainer& trainer, Stage stage, const BatchSource& self_source,
               const BatchSource& cross_source, const RunStageOptions& options);

// Loads only the generator from a checkpoint for inference.
struct LoadedGenerator {
    TrainConfig config;
    Generator generator{nullptr};
    Stage stage = Stage::kSelfReconstruction;
};
LoadedGenerator load_generator(const std::string& path, torch::Device device = torch::kCPU);

// Inference helpers (eval mode, no autograd).
torch::Tensor blend_panorama(Generator& generator, const torch::Tensor& left,
                             const torch::Tensor& right);

// Two reciprocal blends stitched into a 256 x 1024 loop:
// [A | G(A,B).mid | B | G(B,A).mid].
torch::Tensor cyclic_panorama(Generator& generator, const torch::Tensor& a,
                              const torch::Tensor& b);

} // namespace wrib

#endif // WRIB_TRAINING_HPP
