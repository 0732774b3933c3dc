#include "wrib/losses.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"

#include <cmath>
#include <string>

namespace F = torch::nn::functional;

namespace wrib {

double mask_value(int64_t x, int64_t width, double sigma_divisor) {
    const double sigma = static_cast<double>(width) / sigma_divisor;
    const double d = static_cast<double>(x);
    const double w = static_cast<double>(width);
    return std::exp(-0.5 * (d / sigma) * (d / sigma)) +
           std::exp(-0.5 * ((d - w) / sigma) * ((d - w) / sigma));
}

torch::Tensor weight_mask(int64_t width, double sigma_divisor) {
    if (width < 2) {
        throw InvalidWidth("weight_mask: width must be at least 2");
    }
    auto d = torch::arange(width, torch::kFloat64);
    const double sigma = static_cast<double>(width) / sigma_divisor;
    auto near = torch::exp(-0.5 * (d / sigma).pow(2));
    auto far = torch::exp(-0.5 * ((d - static_cast<double>(width)) / sigma).pow(2));
    return (near + far).view({1, 1, 1, width});
}

torch::Tensor mse(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) {
        throw ShapeMismatch("mse: operand shapes differ");
    }
    return (a - b).pow(2).mean();
}

torch::Tensor pixel_loss_sr(const torch::Tensor& pred, const torch::Tensor& left,
                            const torch::Tensor& mid, const torch::Tensor& right) {
    auto thirds = split_thirds(pred);
    auto mask = weight_mask(thirds.mid.size(-1)).to(pred.dtype()).to(pred.device());
    auto weighted = mask * (thirds.mid - mid);
    return mse(thirds.left, left) + mse(thirds.right, right) + weighted.pow(2).mean();
}

torch::Tensor pixel_loss_ft(const torch::Tensor& pred, const torch::Tensor& left,
                            const torch::Tensor& right) {
    auto thirds = split_thirds(pred);
    return mse(thirds.left, left) + mse(thirds.right, right);
}

torch::Tensor feat_rec_loss(const torch::Tensor& f_mid, const torch::Tensor& target_feat) {
    return mse(f_mid, target_feat.detach());
}

torch::Tensor feat_con_loss(const torch::Tensor& fwd_mid, const torch::Tensor& bwd_mid,
                            const torch::Tensor& fwd_right, const torch::Tensor& bwd_left,
                            const torch::Tensor& f_left, const torch::Tensor& f_right) {
    return mse(f_left, bwd_left) + mse(fwd_mid, bwd_mid) + mse(fwd_right, f_right);
}

torch::Tensor idmrf_layer_loss(const torch::Tensor& gen, const torch::Tensor& target,
                               const IdmrfOptions& options) {
    if (gen.dim() != 4 || gen.sizes() != target.sizes()) {
        throw ShapeMismatch("idmrf: feature shapes differ");
    }
    const int64_t p = options.patch;
    if (p > gen.size(2) || p > gen.size(3)) {
        throw PatchTooLarge("idmrf: patch exceeds feature size");
    }
    auto unfold = [&](const torch::Tensor& f) {
        return F::unfold(f, F::UnfoldFuncOptions({p, p}).stride(options.stride))
            .transpose(1, 2); // N x L x C*p*p
    };
    auto g = unfold(gen);
    auto t = unfold(target.detach());
    auto g_hat = F::normalize(g, F::NormalizeFuncOptions().dim(2).eps(1e-12));
    auto t_hat = F::normalize(t, F::NormalizeFuncOptions().dim(2).eps(1e-12));

    // Cosine similarity of every generated patch v to every target patch s.
    auto mu = g_hat.matmul(t_hat.transpose(1, 2)); // N x Lv x Ls
    auto mx = std::get<0>(mu.max(/*dim=*/2, /*keepdim=*/true));
    auto rs = torch::exp((mu / (mx + options.epsilon)) / options.bandwidth);
    auto rs_bar = rs / rs.sum(/*dim=*/2, /*keepdim=*/true);
    // Each target patch claims its best-matching generated patch.
    auto best = std::get<0>(rs_bar.max(/*dim=*/1)); // N x Ls
    return -torch::log(best.mean(/*dim=*/1)).mean();
}

torch::Tensor idmrf_loss(Vgg19Features& vgg, const torch::Tensor& pred,
                         const torch::Tensor& target, const IdmrfOptions& options) {
    auto gen_feats = vgg->forward(pred);
    auto target_feats = vgg->forward(target.detach());
    torch::Tensor total;
    for (std::size_t i = 0; i < gen_feats.size(); ++i) {
        auto layer = idmrf_layer_loss(gen_feats[i], target_feats[i], options);
        total = total.defined() ? total + layer : layer;
    }
    return total;
}

} // namespace wrib
