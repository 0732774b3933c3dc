#ifndef WRIB_BCT_HPP
#define WRIB_BCT_HPP

#include <torch/torch.h>

#include <utility>
#include <vector>

namespace wrib {

// Ordered vertical slices of a feature map; concatenating them along the
// width reconstructs the source map exactly.
using SubFeatureSequence = std::vector<torch::Tensor>;

// Splits an N x C x H x W map into K equal-width slices. Throws
// IndivisibleWidth when K does not divide W.
SubFeatureSequence split_vertical(const torch::Tensor& f, int64_t k);
torch::Tensor concat_slices(const SubFeatureSequence& slices);

struct BctOptions {
    int64_t channels = 1024;       // C_b
    int64_t height = 8;            // H_b
    int64_t width = 8;             // W_b per side
    int64_t K = 4;                 // slices per side
    int64_t hidden = 1024;         // LSTM hidden size D_h
    int64_t reduce_channels = 64;  // 1x1 bottleneck ahead of flattening
};

// The six outputs of one bidirectional pass. All sequences are stored in
// left-to-right slice order.
struct BctOutput {
    SubFeatureSequence fwd_mid, fwd_right; // left -> right direction
    SubFeatureSequence bwd_mid, bwd_left;  // right -> left direction
    torch::Tensor fused_mid;               // N x C_b x H_b x W_b
};

// Recurrent content transfer between the two encoded inputs: a weight
// shared LSTM encoder summarizes the far side into a latent condition,
// and a conditional LSTM decoder extends the near side across the middle
// towards it. Both directions run through the same two parameter sets.
class BctImpl : public torch::nn::Module {
public:
    explicit BctImpl(BctOptions options);

    // Final hidden state of the condition LSTM after the K slices.
    torch::Tensor encode_condition(const SubFeatureSequence& seq);

    // K warm-up steps on the input slices, then 2K autoregressive steps;
    // the first K predictions are the mid sequence, the next K the far one.
    std::pair<SubFeatureSequence, SubFeatureSequence> decode_conditional(
        const SubFeatureSequence& input_seq, const torch::Tensor& condition);

    // Channel-concat of the two mid sequences (both left-to-right) and a
    // 1x1 convolution back to C_b.
    torch::Tensor fuse_mid(const SubFeatureSequence& fwd_mid, const SubFeatureSequence& bwd_mid);

    BctOutput forward(const torch::Tensor& f_left, const torch::Tensor& f_right);

    const BctOptions& options() const { return options_; }

private:
    torch::Tensor embed_enc(const torch::Tensor& slice);
    torch::Tensor embed_dec(const torch::Tensor& slice);
    torch::Tensor token_to_slice(const torch::Tensor& token);

    BctOptions options_;
    int64_t token_dim_ = 0;

    torch::nn::Conv2d enc_reduce_{nullptr}, dec_reduce_{nullptr}, dec_expand_{nullptr};
    torch::nn::LSTMCell enc_cell_{nullptr}, dec_cell_{nullptr};
    torch::nn::Linear cond_to_h_{nullptr}, cond_to_c_{nullptr}, head_{nullptr};
    torch::nn::Conv2d fuse_{nullptr};
};
TORCH_MODULE(Bct);

} // namespace wrib

#endif // WRIB_BCT_HPP
