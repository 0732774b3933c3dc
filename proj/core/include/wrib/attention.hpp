#ifndef WRIB_ATTENTION_HPP
#define WRIB_ATTENTION_HPP

#include <torch/torch.h>

#include <utility>
#include <vector>

namespace wrib {

// Feature patches with their source coordinates, all C x p x p.
struct PatchSet {
    torch::Tensor patches; // N x C x p x p
    std::vector<std::pair<int64_t, int64_t>> origins; // (y, x), row-major
    int64_t patch_size() const { return patches.size(2); }
};

// All p x p windows of a CxHxW map at the given stride, row-major.
// Throws PatchTooLarge.
PatchSet extract_patches(const torch::Tensor& feat, int64_t p, int64_t stride);

// Cosine-similarity attention of every query patch over the key patches:
// softmax(scale * sim) weights combine the raw key patches, and the
// reconstructed patches are assembled by overlap averaging. Output has
// the query's shape. Throws ChannelMismatch / EmptyKeys / PatchTooLarge.
torch::Tensor contextual_attention(const torch::Tensor& query, const PatchSet& keys,
                                   double scale, int64_t p = 3, int64_t stride = 1);

struct ContextualAttentionOptions {
    int64_t patch = 3;
    int64_t stride = 1;
    double scale = 10.0;
};

// Skip-connection attention: the decoder's middle-third feature is the
// missing region, the two encoder features are the surroundings. The
// attention output is channel-concatenated with the query and merged by
// a learned 1x1 convolution.
class ContextualAttentionImpl : public torch::nn::Module {
public:
    ContextualAttentionImpl(int64_t channels, ContextualAttentionOptions options = {});

    // All inputs N x C x H x W at the same pyramid level.
    torch::Tensor attend_skip(const torch::Tensor& decoder_mid_feat,
                              const torch::Tensor& enc_left_feat,
                              const torch::Tensor& enc_right_feat);

    const ContextualAttentionOptions& options() const { return options_; }

private:
    ContextualAttentionOptions options_;
    torch::nn::Conv2d merge_{nullptr};
};
TORCH_MODULE(ContextualAttention);

} // namespace wrib

#endif // WRIB_ATTENTION_HPP
