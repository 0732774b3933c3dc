#include "wrib/bct.hpp"

#include "wrib/errors.hpp"

#include <algorithm>
#include <string>

namespace wrib {
namespace {

SubFeatureSequence reversed(const SubFeatureSequence& seq) {
    return SubFeatureSequence(seq.rbegin(), seq.rend());
}

} // namespace

SubFeatureSequence split_vertical(const torch::Tensor& f, int64_t k) {
    if (f.dim() != 4) {
        throw ShapeMismatch("split_vertical expects an NxCxHxW map");
    }
    const int64_t w = f.size(3);
    if (k < 1 || w % k != 0) {
        throw IndivisibleWidth("split_vertical: " + std::to_string(k) +
                               " slices do not divide width " + std::to_string(w));
    }
    const int64_t sw = w / k;
    SubFeatureSequence slices;
    slices.reserve(static_cast<std::size_t>(k));
    for (int64_t i = 0; i < k; ++i) {
        slices.push_back(f.narrow(3, i * sw, sw));
    }
    return slices;
}

torch::Tensor concat_slices(const SubFeatureSequence& slices) {
    if (slices.empty()) {
        throw ShapeMismatch("concat_slices: empty sequence");
    }
    return torch::cat(slices, 3);
}

BctImpl::BctImpl(BctOptions options) : options_(options) {
    if (options_.K < 1 || options_.width % options_.K != 0) {
        throw IndivisibleWidth("bct: K must divide the bottleneck width");
    }
    const int64_t sw = options_.width / options_.K;
    token_dim_ = options_.reduce_channels * options_.height * sw;

    enc_reduce_ = register_module(
        "enc_reduce",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(options_.channels, options_.reduce_channels, 1)));
    dec_reduce_ = register_module(
        "dec_reduce",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(options_.channels, options_.reduce_channels, 1)));
    dec_expand_ = register_module(
        "dec_expand",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(options_.reduce_channels, options_.channels, 1)));
    enc_cell_ = register_module(
        "enc_cell", torch::nn::LSTMCell(torch::nn::LSTMCellOptions(token_dim_, options_.hidden)));
    dec_cell_ = register_module(
        "dec_cell", torch::nn::LSTMCell(torch::nn::LSTMCellOptions(token_dim_, options_.hidden)));
    cond_to_h_ = register_module("cond_to_h", torch::nn::Linear(options_.hidden, options_.hidden));
    cond_to_c_ = register_module("cond_to_c", torch::nn::Linear(options_.hidden, options_.hidden));
    head_ = register_module("head", torch::nn::Linear(options_.hidden, token_dim_));
    fuse_ = register_module(
        "fuse", torch::nn::Conv2d(torch::nn::Conv2dOptions(2 * options_.channels, options_.channels, 1)));
}

torch::Tensor BctImpl::embed_enc(const torch::Tensor& slice) {
    return enc_reduce_->forward(slice).flatten(1);
}

torch::Tensor BctImpl::embed_dec(const torch::Tensor& slice) {
    return dec_reduce_->forward(slice).flatten(1);
}

torch::Tensor BctImpl::token_to_slice(const torch::Tensor& token) {
    const int64_t sw = options_.width / options_.K;
    auto grid = token.view({token.size(0), options_.reduce_channels, options_.height, sw});
    return dec_expand_->forward(grid);
}

torch::Tensor BctImpl::encode_condition(const SubFeatureSequence& seq) {
    if (static_cast<int64_t>(seq.size()) != options_.K) {
        throw ShapeMismatch("encode_condition expects K slices");
    }
    torch::Tensor h, c;
    for (const auto& slice : seq) {
        auto token = embed_enc(slice);
        if (!h.defined()) {
            std::tie(h, c) = enc_cell_->forward(token);
        } else {
            std::tie(h, c) = enc_cell_->forward(token, std::make_tuple(h, c));
        }
    }
    return h;
}

std::pair<SubFeatureSequence, SubFeatureSequence> BctImpl::decode_conditional(
    const SubFeatureSequence& input_seq, const torch::Tensor& condition) {
    if (static_cast<int64_t>(input_seq.size()) != options_.K) {
        throw ShapeMismatch("decode_conditional expects K slices");
    }
    torch::Tensor h = cond_to_h_->forward(condition);
    torch::Tensor c = cond_to_c_->forward(condition);
    for (const auto& slice : input_seq) {
        std::tie(h, c) = dec_cell_->forward(embed_dec(slice), std::make_tuple(h, c));
    }
    SubFeatureSequence mid, far;
    auto token = head_->forward(h);
    for (int64_t step = 0; step < 2 * options_.K; ++step) {
        (step < options_.K ? mid : far).push_back(token_to_slice(token));
        if (step + 1 < 2 * options_.K) {
            std::tie(h, c) = dec_cell_->forward(token, std::make_tuple(h, c));
            token = head_->forward(h);
        }
    }
    return {std::move(mid), std::move(far)};
}

torch::Tensor BctImpl::fuse_mid(const SubFeatureSequence& fwd_mid,
                                const SubFeatureSequence& bwd_mid) {
    auto both = torch::cat({concat_slices(fwd_mid), concat_slices(bwd_mid)}, 1);
    return fuse_->forward(both);
}

BctOutput BctImpl::forward(const torch::Tensor& f_left, const torch::Tensor& f_right) {
    for (const auto* f : {&f_left, &f_right}) {
        if (f->dim() != 4 || f->size(1) != options_.channels || f->size(2) != options_.height ||
            f->size(3) != options_.width) {
            throw ShapeMismatch("bct: features must be Nx" + std::to_string(options_.channels) +
                                "x" + std::to_string(options_.height) + "x" +
                                std::to_string(options_.width));
        }
    }
    auto left_slices = split_vertical(f_left, options_.K);
    auto right_slices = split_vertical(f_right, options_.K);

    BctOutput out;
    // Left-to-right: condition on the right image, extend from the left.
    auto cond_fwd = encode_condition(right_slices);
    std::tie(out.fwd_mid, out.fwd_right) = decode_conditional(left_slices, cond_fwd);

    // Right-to-left: the same cells walk the mirrored sequences.
    auto cond_bwd = encode_condition(reversed(left_slices));
    auto [mid_rev, far_rev] = decode_conditional(reversed(right_slices), cond_bwd);
    out.bwd_mid = reversed(mid_rev);
    out.bwd_left = reversed(far_rev);

    out.fused_mid = fuse_mid(out.fwd_mid, out.bwd_mid);
    return out;
}

} // namespace wrib
