#ifndef WRIB_GENERATOR_HPP
#define WRIB_GENERATOR_HPP

#include <torch/torch.h>

#include "wrib/attention.hpp"
#include "wrib/bct.hpp"
#include "wrib/config.hpp"

#include <vector>

namespace wrib {

// Skip features at spatial factors /2, /4, /8, /16 (shallow to deep).
using SkipFeatures = std::vector<torch::Tensor>;
inline constexpr int64_t kSkipLevels = 4;

struct EncoderOutput {
    torch::Tensor bottleneck; // N x C_b x 8 x 8
    SkipFeatures skips;
};

// Residual bottleneck block: 1x1 reduce, 3x3, 1x1 expand, identity add.
class BottleneckBlockImpl : public torch::nn::Module {
public:
    explicit BottleneckBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d reduce_{nullptr}, conv_{nullptr}, expand_{nullptr};
};
TORCH_MODULE(BottleneckBlock);

// Strided 4x4 downsampling convolution followed by two residual blocks.
// Instance normalization is attached only when `use_in` is set.
class DownStageImpl : public torch::nn::Module {
public:
    DownStageImpl(int64_t in_ch, int64_t out_ch, bool use_in);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d down_{nullptr};
    torch::nn::InstanceNorm2d norm_{nullptr};
    BottleneckBlock block1_{nullptr}, block2_{nullptr};
    bool use_in_ = false;
};
TORCH_MODULE(DownStage);

// Image context encoder: 7x7 stem, one extra 3x3 adaptation convolution,
// then four residual stages down to /32 with C_b channels. Instance
// normalization survives only in the three deepest downsampling convs.
class EncoderImpl : public torch::nn::Module {
public:
    explicit EncoderImpl(int64_t bottleneck_channels);
    EncoderOutput forward(const torch::Tensor& image); // N x 3 x 256 x 256
    int64_t bottleneck_channels() const { return channels_; }

private:
    int64_t channels_;
    torch::nn::Conv2d stem_{nullptr}, adapt_{nullptr};
    DownStage stage1_{nullptr}, stage2_{nullptr}, stage3_{nullptr}, stage4_{nullptr};
};
TORCH_MODULE(Encoder);

// Fuses a full-width encoder feature into the decoder path: 1x1 reduce
// on the encoder side, channel concat, 3x3 back to decoder channels,
// added residually onto the decoder feature.
class SkipHorizontalConnectionImpl : public torch::nn::Module {
public:
    SkipHorizontalConnectionImpl(int64_t enc_ch, int64_t dec_ch);
    torch::Tensor forward(const torch::Tensor& decoder_feat, const torch::Tensor& encoder_feat);

private:
    torch::nn::Conv2d reduce_{nullptr}, fuse_{nullptr};
};
TORCH_MODULE(SkipHorizontalConnection);

// Dual dilated 3x3 branches (dilations 2 and 4) summed into the residual.
class GlobalResidualBlockImpl : public torch::nn::Module {
public:
    explicit GlobalResidualBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& x);

private:
    torch::nn::Conv2d dil2_{nullptr}, dil4_{nullptr};
};
TORCH_MODULE(GlobalResidualBlock);

// Decoder from the concatenated bottleneck (C_b x 8 x 24) to the 256x768
// panorama. Skip maps are assembled as [left | mid | right] where the mid
// third comes from the attention module at the configured level and is
// zero elsewhere.
class DecoderImpl : public torch::nn::Module {
public:
    DecoderImpl(int64_t bottleneck_channels, int64_t attention_level);

    torch::Tensor forward(const torch::Tensor& f_concat, const SkipFeatures& skips_left,
                          const SkipFeatures& skips_right,
                          ContextualAttention attention = nullptr);

    int64_t attention_level() const { return attention_level_; }

private:
    torch::Tensor apply_skip(const torch::Tensor& dec, const torch::Tensor& enc_left,
                             const torch::Tensor& enc_right, int64_t level,
                             SkipHorizontalConnection& shc, ContextualAttention& attention);

    int64_t channels_;
    int64_t attention_level_; // pyramid factor: 2, 4, 8 or 16
    GlobalResidualBlock grb_{nullptr};
    torch::nn::ConvTranspose2d up16_{nullptr}, up8_{nullptr}, up4_{nullptr}, up2_{nullptr},
        adapt_{nullptr}, up1_{nullptr};
    torch::nn::InstanceNorm2d norm16_{nullptr}, norm8_{nullptr}, norm4_{nullptr};
    SkipHorizontalConnection shc16_{nullptr}, shc8_{nullptr}, shc4_{nullptr}, shc2_{nullptr};
    torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(Decoder);

struct GeneratorOutput {
    torch::Tensor panorama;          // N x 3 x 256 x 768, in [-1, 1]
    torch::Tensor f_left, f_right;   // encoder bottlenecks
    BctOutput bct;                   // recurrent predictions incl. fused_mid
};

// Full blending model: shared encoder on both inputs, bidirectional
// content transfer at the bottleneck, decoder with attention-enhanced
// skip connections.
class GeneratorImpl : public torch::nn::Module {
public:
    explicit GeneratorImpl(const TrainConfig& config);

    GeneratorOutput forward(const torch::Tensor& left, const torch::Tensor& right);

    Encoder& encoder() { return encoder_; }
    Bct& bct() { return bct_; }
    Decoder& decoder() { return decoder_; }
    ContextualAttention& attention() { return attention_; }
    bool use_attention() const { return use_attention_; }

private:
    Encoder encoder_{nullptr};
    Bct bct_{nullptr};
    ContextualAttention attention_{nullptr};
    Decoder decoder_{nullptr};
    bool use_attention_ = true;
};
TORCH_MODULE(Generator);

} // namespace wrib

#endif // WRIB_GENERATOR_HPP
