#ifndef WRIB_DISCRIMINATOR_HPP
#define WRIB_DISCRIMINATOR_HPP

#include <torch/torch.h>

namespace wrib {

// 2d convolution with spectral normalization of the weight. The power
// iteration vector is updated in training mode only, so evaluation is
// deterministic.
class SpectralConv2dImpl : public torch::nn::Module {
public:
    SpectralConv2dImpl(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                       int64_t padding, int64_t power_iterations = 1);

    torch::Tensor forward(const torch::Tensor& x);

    // Current spectral estimate of the raw weight (after the buffers were
    // refreshed by a forward pass in train mode).
    torch::Tensor sigma() const;

    torch::Tensor weight_raw() { return weight_; }

private:
    torch::Tensor normalized_weight();

    torch::Tensor weight_, bias_, u_, v_;
    int64_t stride_, padding_, power_iterations_;
};
TORCH_MODULE(SpectralConv2d);

// Patch discriminator over full 256 x 768 panoramas: six stride-2
// spectrally normalized convolutions with leaky ReLU, then a 1x1 score
// map head (no sigmoid; the relativistic losses consume raw scores).
class DiscriminatorImpl : public torch::nn::Module {
public:
    explicit DiscriminatorImpl(int64_t base_channels = 64);

    torch::Tensor forward(const torch::Tensor& image);

private:
    std::vector<SpectralConv2d> convs_;
    SpectralConv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

struct AdversarialPair {
    torch::Tensor d_loss;
    torch::Tensor g_loss;
};

// Relativistic average least-squares objectives. `real` and `fake` are
// raw critic score maps; expectations are taken over the whole batch of
// score elements.
AdversarialPair ralsgan_losses(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

} // namespace wrib

#endif // WRIB_DISCRIMINATOR_HPP
