#include "wrib/attention.hpp"

#include "wrib/errors.hpp"

#include <string>

namespace F = torch::nn::functional;

namespace wrib {

PatchSet extract_patches(const torch::Tensor& feat, int64_t p, int64_t stride) {
    if (feat.dim() != 3) {
        throw ShapeMismatch("extract_patches expects a CxHxW feature map");
    }
    const int64_t h = feat.size(1);
    const int64_t w = feat.size(2);
    if (p > h || p > w) {
        throw PatchTooLarge("extract_patches: patch " + std::to_string(p) + " exceeds map " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    auto cols = F::unfold(feat.unsqueeze(0),
                          F::UnfoldFuncOptions({p, p}).stride(stride)); // 1 x C*p*p x L
    const int64_t l = cols.size(2);
    PatchSet set;
    set.patches = cols.squeeze(0).transpose(0, 1).reshape({l, feat.size(0), p, p});
    set.origins.reserve(static_cast<std::size_t>(l));
    for (int64_t y = 0; y + p <= h; y += stride) {
        for (int64_t x = 0; x + p <= w; x += stride) {
            set.origins.emplace_back(y, x);
        }
    }
    return set;
}

torch::Tensor contextual_attention(const torch::Tensor& query, const PatchSet& keys,
                                   double scale, int64_t p, int64_t stride) {
    if (query.dim() != 3) {
        throw ShapeMismatch("contextual_attention expects a CxHxW query");
    }
    if (!keys.patches.defined() || keys.patches.size(0) == 0) {
        throw EmptyKeys("contextual_attention: no key patches");
    }
    if (keys.patches.size(1) != query.size(0)) {
        throw ChannelMismatch("contextual_attention: query has " +
                              std::to_string(query.size(0)) + " channels, keys " +
                              std::to_string(keys.patches.size(1)));
    }
    const int64_t h = query.size(1);
    const int64_t w = query.size(2);
    if (p > h || p > w) {
        throw PatchTooLarge("contextual_attention: patch exceeds query size");
    }

    auto q_cols = F::unfold(query.unsqueeze(0), F::UnfoldFuncOptions({p, p}).stride(stride))
                      .squeeze(0)
                      .transpose(0, 1); // Lq x C*p*p
    auto k_cols = keys.patches.reshape({keys.patches.size(0), -1}); // Lk x C*p*p

    auto q_hat = F::normalize(q_cols, F::NormalizeFuncOptions().dim(1).eps(1e-12));
    auto k_hat = F::normalize(k_cols, F::NormalizeFuncOptions().dim(1).eps(1e-12));
    auto weights = torch::softmax(q_hat.matmul(k_hat.t()) * scale, /*dim=*/1); // Lq x Lk

    auto recon = weights.matmul(k_cols); // Lq x C*p*p
    auto folded = F::fold(recon.transpose(0, 1).unsqueeze(0),
                          F::FoldFuncOptions({h, w}, {p, p}).stride(stride));
    auto counts = F::fold(torch::ones_like(recon).transpose(0, 1).unsqueeze(0),
                          F::FoldFuncOptions({h, w}, {p, p}).stride(stride))
                      .clamp_min(1.0);
    return (folded / counts).squeeze(0);
}

ContextualAttentionImpl::ContextualAttentionImpl(int64_t channels,
                                                 ContextualAttentionOptions options)
    : options_(options) {
    merge_ = register_module(
        "merge", torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * channels, channels, 1)));
}

torch::Tensor ContextualAttentionImpl::attend_skip(const torch::Tensor& decoder_mid_feat,
                                                   const torch::Tensor& enc_left_feat,
                                                   const torch::Tensor& enc_right_feat) {
    if (decoder_mid_feat.dim() != 4 || enc_left_feat.dim() != 4 || enc_right_feat.dim() != 4) {
        throw ShapeMismatch("attend_skip expects NxCxHxW features");
    }
    const int64_t n = decoder_mid_feat.size(0);
    std::vector<torch::Tensor> attended;
    attended.reserve(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        auto left = extract_patches(enc_left_feat[i], options_.patch, options_.stride);
        auto right = extract_patches(enc_right_feat[i], options_.patch, options_.stride);
        PatchSet keys;
        keys.patches = torch::cat({left.patches, right.patches}, 0);
        attended.push_back(contextual_attention(decoder_mid_feat[i], keys, options_.scale,
                                                options_.patch, options_.stride));
    }
    auto att = torch::stack(attended, 0);
    return merge_->forward(torch::cat({decoder_mid_feat, att}, 1));
}

} // namespace wrib
