#include "wrib/training.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"
#include "wrib/losses.hpp"
#include "wrib/protocol.hpp"
#include "wrib/tensor_archive.hpp"

#include <string>
#include <utility>
#include <vector>

namespace wrib {
namespace {

void check_input_shape(const torch::Tensor& t, const char* what) {
    if (!t.defined() || t.numel() == 0) {
        throw EmptyBatch(std::string("trainer: empty ") + what + " tensor");
    }
    if (t.dim() != 4 || t.size(1) != 3 || t.size(2) != kInputSize || t.size(3) != kInputSize) {
        throw ShapeMismatch(std::string("trainer: ") + what + " must be Nx3x256x256");
    }
}

using NamedParams = std::vector<std::pair<std::string, torch::Tensor>>;

NamedParams named_params(const torch::nn::Module& module) {
    NamedParams out;
    for (const auto& p : module.named_parameters(/*recurse=*/true)) {
        out.emplace_back(p.key(), p.value());
    }
    return out;
}

void save_adam(TensorArchive& archive, const std::string& prefix, const torch::optim::Adam& opt,
               const NamedParams& params) {
    const auto& state = opt.state();
    for (const auto& [name, param] : params) {
        auto it = state.find(param.unsafeGetTensorImpl());
        if (it == state.end()) {
            continue; // parameter never updated yet
        }
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        archive.put(prefix + "/" + name + "/exp_avg", s.exp_avg());
        archive.put(prefix + "/" + name + "/exp_avg_sq", s.exp_avg_sq());
        archive.put_int(prefix + "/" + name + "/step", s.step());
        if (s.max_exp_avg_sq().defined()) {
            archive.put(prefix + "/" + name + "/max_exp_avg_sq", s.max_exp_avg_sq());
        }
    }
}

void load_adam(const TensorArchive& archive, const std::string& prefix, torch::optim::Adam& opt,
               const NamedParams& params) {
    for (const auto& [name, param] : params) {
        const std::string base = prefix + "/" + name;
        if (!archive.contains(base + "/exp_avg")) {
            continue;
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(archive.get_int(base + "/step"));
        s->exp_avg(archive.get(base + "/exp_avg"));
        s->exp_avg_sq(archive.get(base + "/exp_avg_sq"));
        if (archive.contains(base + "/max_exp_avg_sq")) {
            s->max_exp_avg_sq(archive.get(base + "/max_exp_avg_sq"));
        }
        opt.state()[param.unsafeGetTensorImpl()] = std::move(s);
    }
}

} // namespace

const char* stage_name(Stage stage) {
    return stage == Stage::kSelfReconstruction ? "sr" : "ft";
}

Stage stage_from_name(const std::string& name) {
    if (name == "sr") {
        return Stage::kSelfReconstruction;
    }
    if (name == "ft") {
        return Stage::kFineTune;
    }
    throw BadCheckpoint("unknown training stage '" + name + "'");
}

Trainer::Trainer(const TrainConfig& config, torch::Device device)
    : config_(config), device_(device) {
    config_.validate();
    seed_all(config_.seed);
    generator_ = Generator(config_);
    discriminator_ = Discriminator(config_.disc_channels);
    vgg_ = Vgg19Features(config_.vgg_weights);
    generator_->to(device_);
    discriminator_->to(device_);
    vgg_->to(device_);

    auto betas = std::make_tuple(config_.beta1, config_.beta2);
    opt_g_ = std::make_unique<torch::optim::Adam>(
        generator_->parameters(), torch::optim::AdamOptions(config_.lr_g).betas(betas));
    opt_d_ = std::make_unique<torch::optim::Adam>(
        discriminator_->parameters(), torch::optim::AdamOptions(config_.lr_d).betas(betas));
}

torch::Tensor Trainer::generator_objective(const Batch& batch, Stage stage,
                                           const GeneratorOutput& out, LossReport& report) {
    const bool self_batch = !batch.is_cross;
    auto total = torch::zeros({}, out.panorama.options());

    if (config_.lambda_pixel > 0) {
        torch::Tensor pixel;
        if (self_batch) {
            pixel = pixel_loss_sr(out.panorama, batch.left, batch.mid, batch.right);
        } else {
            pixel = pixel_loss_ft(out.panorama, batch.left, batch.right);
        }
        report.pixel = pixel.item<double>();
        total = total + config_.lambda_pixel * pixel;
    }
    if (self_batch && config_.lambda_feat_rec > 0) {
        torch::Tensor target;
        {
            torch::NoGradGuard no_grad;
            target = generator_->encoder()->forward(batch.mid).bottleneck;
        }
        auto feat_rec = feat_rec_loss(out.bct.fused_mid, target);
        report.feat_rec = feat_rec.item<double>();
        total = total + config_.lambda_feat_rec * feat_rec;
    }
    if (self_batch && config_.lambda_mrf > 0) {
        auto pred_mid = split_thirds(out.panorama).mid;
        auto mrf = idmrf_loss(vgg_, pred_mid, batch.mid);
        report.mrf = mrf.item<double>();
        total = total + config_.lambda_mrf * mrf;
    }
    if (config_.lambda_feat_con > 0) {
        auto feat_con = feat_con_loss(concat_slices(out.bct.fwd_mid),
                                      concat_slices(out.bct.bwd_mid),
                                      concat_slices(out.bct.fwd_right),
                                      concat_slices(out.bct.bwd_left), out.f_left, out.f_right);
        report.feat_con = feat_con.item<double>();
        total = total + config_.lambda_feat_con * feat_con;
    }
    (void)stage;
    return total;
}

LossReport Trainer::step(const Batch& batch, Stage stage) {
    check_input_shape(batch.left, "left");
    check_input_shape(batch.right, "right");
    if (batch.is_cross && stage == Stage::kSelfReconstruction) {
        throw StageBatchMismatch("trainer: cross-image batch in the self-reconstruction stage");
    }
    if (!batch.is_cross) {
        check_input_shape(batch.mid, "mid");
    }

    LossReport report;
    report.cross = batch.is_cross;
    generator_->train();
    discriminator_->train();

    auto out = generator_->forward(batch.left.to(device_), batch.right.to(device_));

    if (config_.lambda_adv > 0) {
        torch::Tensor real = batch.real;
        if (!real.defined() && !batch.is_cross) {
            real = torch::cat({batch.left, batch.mid, batch.right}, 3);
        }
        if (!real.defined()) {
            throw StageBatchMismatch("trainer: cross-image batch without reference crops");
        }
        if (real.dim() != 4 || real.size(1) != 3 || real.size(2) != kInputSize ||
            real.size(3) != kPanoramaWidth) {
            throw ShapeMismatch("trainer: reference crops must be Nx3x256x768");
        }
        real = real.to(device_);

        // critic update on the detached panorama
        auto d_pair = ralsgan_losses(discriminator_->forward(real),
                                     discriminator_->forward(out.panorama.detach()));
        opt_d_->zero_grad();
        d_pair.d_loss.backward();
        opt_d_->step();
        report.adv_d = d_pair.d_loss.item<double>();

        // generator update sees fresh critic scores
        auto g_pair = ralsgan_losses(discriminator_->forward(real),
                                     discriminator_->forward(out.panorama));
        auto total = generator_objective(batch, stage, out, report) +
                     config_.lambda_adv * g_pair.g_loss;
        report.adv_g = g_pair.g_loss.item<double>();
        report.total_g = total.item<double>();
        opt_g_->zero_grad();
        total.backward();
        opt_g_->step();
    } else {
        auto total = generator_objective(batch, stage, out, report);
        report.total_g = total.item<double>();
        opt_g_->zero_grad();
        total.backward();
        opt_g_->step();
    }
    ++global_step_;
    if (stage == Stage::kSelfReconstruction) {
        ++sr_steps_;
    }
    return report;
}

void run_stage(Trainer& trainer, Stage stage, const BatchSource& self_source,
               const BatchSource& cross_source, const RunStageOptions& options) {
    if (stage == Stage::kFineTune && options.iters > 0 && trainer.sr_steps() == 0) {
        throw MissingSRCheckpoint(
            "fine-tuning requires a trainer warmed by a self-reconstruction run");
    }
    auto checkpoint = [&] {
        if (!options.checkpoint_path.empty()) {
            trainer.save_checkpoint(options.checkpoint_path, stage);
        }
    };
    for (int64_t i = 0; i < options.iters; ++i) {
        Batch batch;
        if (stage == Stage::kFineTune && i % 2 == 1) {
            batch = cross_source();
        } else {
            batch = self_source();
        }
        auto report = trainer.step(batch, stage);
        if (options.on_step) {
            options.on_step(i, report);
        }
        if (options.checkpoint_every > 0 && (i + 1) % options.checkpoint_every == 0) {
            checkpoint();
        }
    }
    checkpoint();
}

void Trainer::save_checkpoint(const std::string& path, Stage stage) const {
    TensorArchive archive(protocol::kCheckpointTag);
    archive.put_string("meta/config", config_.serialize());
    archive.put_string("meta/stage", stage_name(stage));
    archive.put_int("meta/step", global_step_);
    archive.put_int("meta/sr_steps", sr_steps_);
    save_module(archive, "generator", *generator_);
    save_module(archive, "discriminator", *discriminator_);
    save_adam(archive, "opt_g", *opt_g_, named_params(*generator_));
    save_adam(archive, "opt_d", *opt_d_, named_params(*discriminator_));
    archive.save(path);
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const std::string& path, torch::Device device) {
    auto archive = TensorArchive::load(path);
    if (archive.tag() != protocol::kCheckpointTag) {
        throw VersionMismatch("checkpoint: tag '" + archive.tag() + "', expected '" +
                              protocol::kCheckpointTag + "'");
    }
    auto config = TrainConfig::parse_text(archive.get_string("meta/config"));
    auto trainer = std::make_unique<Trainer>(config, device);
    load_module(archive, "generator", *trainer->generator_);
    load_module(archive, "discriminator", *trainer->discriminator_);
    load_adam(archive, "opt_g", *trainer->opt_g_, named_params(*trainer->generator_));
    load_adam(archive, "opt_d", *trainer->opt_d_, named_params(*trainer->discriminator_));
    trainer->global_step_ = archive.get_int("meta/step");
    trainer->sr_steps_ = archive.get_int("meta/sr_steps");
    return trainer;
}

Stage Trainer::checkpoint_stage(const std::string& path) {
    auto archive = TensorArchive::load(path);
    if (archive.tag() != protocol::kCheckpointTag) {
        throw VersionMismatch("checkpoint: tag '" + archive.tag() + "', expected '" +
                              protocol::kCheckpointTag + "'");
    }
    return stage_from_name(archive.get_string("meta/stage"));
}

LoadedGenerator load_generator(const std::string& path, torch::Device device) {
    auto archive = TensorArchive::load(path);
    if (archive.tag() != protocol::kCheckpointTag) {
        throw VersionMismatch("checkpoint: tag '" + archive.tag() + "', expected '" +
                              protocol::kCheckpointTag + "'");
    }
    LoadedGenerator out;
    out.config = TrainConfig::parse_text(archive.get_string("meta/config"));
    out.stage = stage_from_name(archive.get_string("meta/stage"));
    {
        RngScope rng(out.config.seed);
        out.generator = Generator(out.config);
    }
    load_module(archive, "generator", *out.generator);
    out.generator->to(device);
    out.generator->eval();
    return out;
}

torch::Tensor blend_panorama(Generator& generator, const torch::Tensor& left,
                             const torch::Tensor& right) {
    torch::NoGradGuard no_grad;
    generator->eval();
    auto l = left.dim() == 3 ? left.unsqueeze(0) : left;
    auto r = right.dim() == 3 ? right.unsqueeze(0) : right;
    auto out = generator->forward(l, r).panorama;
    return left.dim() == 3 ? out.squeeze(0) : out;
}

torch::Tensor cyclic_panorama(Generator& generator, const torch::Tensor& a,
                              const torch::Tensor& b) {
    auto first = blend_panorama(generator, a, b);
    auto second = blend_panorama(generator, b, a);
    auto back_mid = split_thirds(second).mid;
    return torch::cat({first, back_mid}, first.dim() - 1);
}

} // namespace wrib
