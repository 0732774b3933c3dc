#include "wrib/lpips.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"
#include "wrib/tensor_archive.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace wrib {
namespace {

constexpr int64_t kTapChannels[] = {64, 192, 384, 256, 256};

} // namespace

LpipsImpl::LpipsImpl(const std::string& weights_path) {
    RngScope rng(0x19215ULL);
    trunk_ = nn::Sequential(
        nn::Conv2d(nn::Conv2dOptions(3, 64, 11).stride(4).padding(2)), nn::ReLU(),
        nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)),
        nn::Conv2d(nn::Conv2dOptions(64, 192, 5).padding(2)), nn::ReLU(),
        nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2)),
        nn::Conv2d(nn::Conv2dOptions(192, 384, 3).padding(1)), nn::ReLU(),
        nn::Conv2d(nn::Conv2dOptions(384, 256, 3).padding(1)), nn::ReLU(),
        nn::Conv2d(nn::Conv2dOptions(256, 256, 3).padding(1)), nn::ReLU());
    register_module("trunk", trunk_);
    taps_ = {1, 4, 7, 9, 11};

    lin_weights_.reserve(std::size(kTapChannels));
    for (std::size_t i = 0; i < std::size(kTapChannels); ++i) {
        auto w = torch::rand({1, kTapChannels[i], 1, 1}) * 0.1;
        lin_weights_.push_back(register_buffer("lin" + std::to_string(i), w));
    }

    if (!weights_path.empty()) {
        auto archive = TensorArchive::load(weights_path);
        load_module(archive, "lpips", *this);
        pretrained_ = true;
    }
    for (auto& p : parameters()) {
        p.set_requires_grad(false);
    }
    eval();
}

std::vector<torch::Tensor> LpipsImpl::features(const torch::Tensor& image) {
    // Input calibration of the perceptual-similarity network.
    auto shift = torch::tensor({-0.030f, -0.088f, -0.188f}).view({1, 3, 1, 1});
    auto scale = torch::tensor({0.458f, 0.448f, 0.450f}).view({1, 3, 1, 1});
    auto x = (image - shift) / scale;

    std::vector<torch::Tensor> out;
    std::size_t next_tap = 0;
    int64_t index = 0;
    for (auto& layer : *trunk_) {
        x = layer.forward(x);
        if (next_tap < taps_.size() && index == taps_[next_tap]) {
            out.push_back(x);
            ++next_tap;
        }
        ++index;
    }
    return out;
}

torch::Tensor LpipsImpl::forward(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) {
        throw ShapeMismatch("lpips: input shapes differ");
    }
    torch::NoGradGuard no_grad;
    auto fa = features(a);
    auto fb = features(b);
    torch::Tensor total;
    for (std::size_t i = 0; i < fa.size(); ++i) {
        auto na = F::normalize(fa[i], F::NormalizeFuncOptions().dim(1).eps(1e-10));
        auto nb = F::normalize(fb[i], F::NormalizeFuncOptions().dim(1).eps(1e-10));
        auto diff = (na - nb).pow(2);
        auto weighted = (diff * lin_weights_[i]).sum(1); // N x H x W
        auto layer = weighted.mean({1, 2});
        total = total.defined() ? total + layer : layer;
    }
    return total;
}

} // namespace wrib
