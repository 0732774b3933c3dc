#include "wrib/generator.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"

#include <string>

namespace nn = torch::nn;

namespace wrib {
namespace {

void zero_init(nn::Conv2d& conv) {
    torch::NoGradGuard no_grad;
    conv->weight.zero_();
    if (conv->bias.defined()) {
        conv->bias.zero_();
    }
}

// Channel width of the pyramid at a downsampling factor, for a model
// whose bottleneck (/32) has `c` channels: /2 -> c/16 ... /16 -> c/2.
int64_t level_channels(int64_t c, int64_t level) {
    return std::max<int64_t>(c * level / kDownsampleFactor, 1);
}

} // namespace

BottleneckBlockImpl::BottleneckBlockImpl(int64_t channels) {
    const int64_t mid = std::max<int64_t>(channels / 4, 1);
    reduce_ = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(channels, mid, 1)));
    conv_ = register_module("conv", nn::Conv2d(nn::Conv2dOptions(mid, mid, 3).padding(1)));
    expand_ = register_module("expand", nn::Conv2d(nn::Conv2dOptions(mid, channels, 1)));
}

torch::Tensor BottleneckBlockImpl::forward(const torch::Tensor& x) {
    auto y = torch::relu(reduce_->forward(x));
    y = torch::relu(conv_->forward(y));
    y = expand_->forward(y);
    return torch::relu(x + y);
}

DownStageImpl::DownStageImpl(int64_t in_ch, int64_t out_ch, bool use_in) : use_in_(use_in) {
    down_ = register_module("down",
                            nn::Conv2d(nn::Conv2dOptions(in_ch, out_ch, 4).stride(2).padding(1)));
    if (use_in_) {
        norm_ = register_module("norm",
                                nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out_ch).affine(true)));
    }
    block1_ = register_module("block1", BottleneckBlock(out_ch));
    block2_ = register_module("block2", BottleneckBlock(out_ch));
}

torch::Tensor DownStageImpl::forward(const torch::Tensor& x) {
    auto y = down_->forward(x);
    if (use_in_) {
        y = norm_->forward(y);
    }
    y = torch::relu(y);
    return block2_->forward(block1_->forward(y));
}

EncoderImpl::EncoderImpl(int64_t bottleneck_channels) : channels_(bottleneck_channels) {
    const int64_t c = channels_;
    stem_ = register_module(
        "stem", nn::Conv2d(nn::Conv2dOptions(3, level_channels(c, 2), 7).stride(2).padding(3)));
    adapt_ = register_module(
        "adapt",
        nn::Conv2d(nn::Conv2dOptions(level_channels(c, 2), level_channels(c, 2), 3).padding(1)));
    stage1_ = register_module("stage1",
                              DownStage(level_channels(c, 2), level_channels(c, 4), false));
    stage2_ = register_module("stage2",
                              DownStage(level_channels(c, 4), level_channels(c, 8), true));
    stage3_ = register_module("stage3",
                              DownStage(level_channels(c, 8), level_channels(c, 16), true));
    stage4_ = register_module("stage4", DownStage(level_channels(c, 16), c, true));
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& image) {
    if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != kInputSize ||
        image.size(3) != kInputSize) {
        throw ShapeMismatch("encoder expects Nx3x256x256 input");
    }
    auto s2 = torch::relu(adapt_->forward(torch::relu(stem_->forward(image))));
    auto s4 = stage1_->forward(s2);
    auto s8 = stage2_->forward(s4);
    auto s16 = stage3_->forward(s8);
    auto bottleneck = stage4_->forward(s16);
    return EncoderOutput{bottleneck, {s2, s4, s8, s16}};
}

SkipHorizontalConnectionImpl::SkipHorizontalConnectionImpl(int64_t enc_ch, int64_t dec_ch) {
    reduce_ = register_module("reduce", nn::Conv2d(nn::Conv2dOptions(enc_ch, dec_ch, 1)));
    fuse_ = register_module("fuse",
                            nn::Conv2d(nn::Conv2dOptions(2 * dec_ch, dec_ch, 3).padding(1)));
    zero_init(fuse_); // the connection starts as an identity
}

torch::Tensor SkipHorizontalConnectionImpl::forward(const torch::Tensor& decoder_feat,
                                                    const torch::Tensor& encoder_feat) {
    if (decoder_feat.sizes().slice(2) != encoder_feat.sizes().slice(2)) {
        throw ShapeMismatch("skip connection: spatial sizes differ");
    }
    auto reduced = torch::relu(reduce_->forward(encoder_feat));
    auto fused = fuse_->forward(torch::cat({decoder_feat, reduced}, 1));
    return decoder_feat + fused;
}

GlobalResidualBlockImpl::GlobalResidualBlockImpl(int64_t channels) {
    dil2_ = register_module(
        "dil2", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(2).dilation(2)));
    dil4_ = register_module(
        "dil4", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(4).dilation(4)));
    zero_init(dil2_);
    zero_init(dil4_);
}

torch::Tensor GlobalResidualBlockImpl::forward(const torch::Tensor& x) {
    return x + dil2_->forward(x) + dil4_->forward(x);
}

DecoderImpl::DecoderImpl(int64_t bottleneck_channels, int64_t attention_level)
    : channels_(bottleneck_channels), attention_level_(attention_level) {
    const int64_t c = channels_;
    grb_ = register_module("grb", GlobalResidualBlock(c));

    auto up = [](int64_t in, int64_t out) {
        return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1));
    };
    up16_ = register_module("up16", up(c, level_channels(c, 16)));
    up8_ = register_module("up8", up(level_channels(c, 16), level_channels(c, 8)));
    up4_ = register_module("up4", up(level_channels(c, 8), level_channels(c, 4)));
    up2_ = register_module("up2", up(level_channels(c, 4), level_channels(c, 2)));
    adapt_ = register_module(
        "adapt", nn::ConvTranspose2d(
                     nn::ConvTranspose2dOptions(level_channels(c, 2), level_channels(c, 2), 3)
                         .stride(1)
                         .padding(1)));
    up1_ = register_module("up1", up(level_channels(c, 2), level_channels(c, 1)));

    auto in = [](int64_t ch) { return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(ch).affine(true)); };
    norm16_ = register_module("norm16", in(level_channels(c, 16)));
    norm8_ = register_module("norm8", in(level_channels(c, 8)));
    norm4_ = register_module("norm4", in(level_channels(c, 4)));

    shc16_ = register_module("shc16",
                             SkipHorizontalConnection(level_channels(c, 16), level_channels(c, 16)));
    shc8_ = register_module("shc8",
                            SkipHorizontalConnection(level_channels(c, 8), level_channels(c, 8)));
    shc4_ = register_module("shc4",
                            SkipHorizontalConnection(level_channels(c, 4), level_channels(c, 4)));
    shc2_ = register_module("shc2",
                            SkipHorizontalConnection(level_channels(c, 2), level_channels(c, 2)));

    out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(level_channels(c, 1), 3, 3).padding(1)));
}

torch::Tensor DecoderImpl::apply_skip(const torch::Tensor& dec, const torch::Tensor& enc_left,
                                      const torch::Tensor& enc_right, int64_t level,
                                      SkipHorizontalConnection& shc,
                                      ContextualAttention& attention) {
    const int64_t third = dec.size(3) / 3;
    torch::Tensor mid;
    if (!attention.is_empty() && level == attention_level_) {
        auto dec_mid = dec.narrow(3, third, third);
        mid = attention->attend_skip(dec_mid, enc_left, enc_right);
    } else {
        mid = torch::zeros_like(dec.narrow(3, third, third));
    }
    auto full = torch::cat({enc_left, mid, enc_right}, 3);
    return shc->forward(dec, full);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& f_concat, const SkipFeatures& skips_left,
                                   const SkipFeatures& skips_right,
                                   ContextualAttention attention) {
    if (f_concat.dim() != 4 || f_concat.size(1) != channels_ ||
        f_concat.size(2) != kBottleneckSize || f_concat.size(3) != 3 * kBottleneckSize) {
        throw ShapeMismatch("decoder expects an Nx" + std::to_string(channels_) + "x" +
                            std::to_string(kBottleneckSize) + "x" +
                            std::to_string(3 * kBottleneckSize) + " bottleneck");
    }
    if (skips_left.size() != kSkipLevels || skips_right.size() != kSkipLevels) {
        throw ShapeMismatch("decoder expects 4 skip levels per side");
    }
    // skips are ordered shallow -> deep: [/2, /4, /8, /16]
    auto x = grb_->forward(f_concat);
    x = torch::relu(norm16_->forward(up16_->forward(x)));
    x = apply_skip(x, skips_left[3], skips_right[3], 16, shc16_, attention);
    x = torch::relu(norm8_->forward(up8_->forward(x)));
    x = apply_skip(x, skips_left[2], skips_right[2], 8, shc8_, attention);
    x = torch::relu(norm4_->forward(up4_->forward(x)));
    x = apply_skip(x, skips_left[1], skips_right[1], 4, shc4_, attention);
    x = torch::relu(up2_->forward(x));
    x = apply_skip(x, skips_left[0], skips_right[0], 2, shc2_, attention);
    x = torch::relu(adapt_->forward(x));
    x = torch::relu(up1_->forward(x));
    return torch::tanh(out_->forward(x));
}

GeneratorImpl::GeneratorImpl(const TrainConfig& config) : use_attention_(config.use_attention) {
    config.validate();
    const int64_t c = config.bottleneck_channels;
    encoder_ = register_module("encoder", Encoder(c));
    BctOptions bct_options;
    bct_options.channels = c;
    bct_options.height = kBottleneckSize;
    bct_options.width = kBottleneckSize;
    bct_options.K = config.K;
    bct_options.hidden = config.effective_lstm_hidden();
    bct_options.reduce_channels = std::max<int64_t>(c / 16, 1);
    bct_ = register_module("bct", Bct(bct_options));
    if (use_attention_) {
        attention_ = register_module(
            "attention", ContextualAttention(level_channels(c, config.attention_level)));
    }
    decoder_ = register_module("decoder", Decoder(c, config.attention_level));
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& left, const torch::Tensor& right) {
    auto enc_l = encoder_->forward(left);
    auto enc_r = encoder_->forward(right);
    auto bct = bct_->forward(enc_l.bottleneck, enc_r.bottleneck);
    auto f_concat = torch::cat({enc_l.bottleneck, bct.fused_mid, enc_r.bottleneck}, 3);
    auto panorama = decoder_->forward(f_concat, enc_l.skips, enc_r.skips,
                                      use_attention_ ? attention_ : ContextualAttention(nullptr));
    GeneratorOutput out;
    out.panorama = panorama;
    out.f_left = enc_l.bottleneck;
    out.f_right = enc_r.bottleneck;
    out.bct = std::move(bct);
    return out;
}

} // namespace wrib
