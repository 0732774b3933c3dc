#include "wrib/discriminator.hpp"

#include "wrib/errors.hpp"

#include <string>

namespace F = torch::nn::functional;

namespace wrib {

SpectralConv2dImpl::SpectralConv2dImpl(int64_t in_ch, int64_t out_ch, int64_t kernel,
                                       int64_t stride, int64_t padding, int64_t power_iterations)
    : stride_(stride), padding_(padding), power_iterations_(power_iterations) {
    weight_ = register_parameter(
        "weight", torch::empty({out_ch, in_ch, kernel, kernel}));
    torch::nn::init::kaiming_uniform_(weight_, std::sqrt(5.0));
    bias_ = register_parameter("bias", torch::zeros({out_ch}));
    u_ = register_buffer("u", F::normalize(torch::randn({out_ch}),
                                           F::NormalizeFuncOptions().dim(0)));
    v_ = register_buffer("v", F::normalize(torch::randn({in_ch * kernel * kernel}),
                                           F::NormalizeFuncOptions().dim(0)));
}

torch::Tensor SpectralConv2dImpl::normalized_weight() {
    auto w_mat = weight_.flatten(1); // out x (in*k*k)
    if (is_training()) {
        torch::NoGradGuard no_grad;
        for (int64_t i = 0; i < power_iterations_; ++i) {
            v_.copy_(F::normalize(w_mat.t().mv(u_), F::NormalizeFuncOptions().dim(0)));
            u_.copy_(F::normalize(w_mat.mv(v_), F::NormalizeFuncOptions().dim(0)));
        }
    }
    // Clones keep sigma's saved inputs valid when a later forward runs
    // another in-place power iteration before backward.
    auto sigma = torch::dot(u_.clone(), w_mat.mv(v_.clone()));
    return weight_ / sigma;
}

torch::Tensor SpectralConv2dImpl::sigma() const {
    auto w_mat = weight_.detach().flatten(1);
    return torch::dot(u_, w_mat.mv(v_));
}

torch::Tensor SpectralConv2dImpl::forward(const torch::Tensor& x) {
    return F::conv2d(x, normalized_weight(), F::Conv2dFuncOptions().bias(bias_).stride(stride_).padding(padding_));
}

DiscriminatorImpl::DiscriminatorImpl(int64_t base_channels) {
    const int64_t cap = 8 * base_channels;
    int64_t in_ch = 3;
    int64_t out_ch = base_channels;
    for (int i = 0; i < 6; ++i) {
        auto conv = SpectralConv2d(in_ch, out_ch, 4, 2, 1);
        convs_.push_back(register_module("conv" + std::to_string(i), conv));
        in_ch = out_ch;
        out_ch = std::min(2 * out_ch, cap);
    }
    head_ = register_module("head", SpectralConv2d(in_ch, 1, 1, 1, 0));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& image) {
    if (image.dim() != 4 || image.size(1) != 3) {
        throw ShapeMismatch("discriminator expects Nx3xHxW input");
    }
    auto x = image;
    for (auto& conv : convs_) {
        x = torch::leaky_relu(conv->forward(x), 0.2);
    }
    return head_->forward(x);
}

AdversarialPair ralsgan_losses(const torch::Tensor& real_scores,
                               const torch::Tensor& fake_scores) {
    if (real_scores.numel() == 0 || fake_scores.numel() == 0) {
        throw EmptyBatch("ralsgan: empty score tensor");
    }
    auto mean_real = real_scores.mean();
    auto mean_fake = fake_scores.mean();
    auto rel_real = real_scores - mean_fake; // D_ra(real, fake)
    auto rel_fake = fake_scores - mean_real; // D_ra(fake, real)
    AdversarialPair out;
    out.d_loss = (rel_real - 1).pow(2).mean() + (rel_fake + 1).pow(2).mean();
    out.g_loss = rel_fake.pow(2).mean();
    return out;
}

} // namespace wrib
