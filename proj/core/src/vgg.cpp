#include "wrib/vgg.hpp"

#include "wrib/common.hpp"
#include "wrib/tensor_archive.hpp"

namespace nn = torch::nn;

namespace wrib {
namespace {

// Convolution plan of the 19-layer configuration up to relu4_2; -1 marks
// a max pool. Indices then match the usual serialized layout, so an
// exported weight archive maps one to one.
constexpr int kPlan[] = {64, 64, -1, 128, 128, -1, 256, 256, 256, 256, -1, 512, 512};

} // namespace

Vgg19FeaturesImpl::Vgg19FeaturesImpl(const std::string& weights_path) {
    RngScope rng(0x76676731397ULL);
    trunk_ = nn::Sequential();
    int64_t in_ch = 3;
    for (int spec : kPlan) {
        if (spec < 0) {
            trunk_->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(2).stride(2)));
        } else {
            trunk_->push_back(nn::Conv2d(nn::Conv2dOptions(in_ch, spec, 3).padding(1)));
            trunk_->push_back(nn::ReLU(nn::ReLUOptions().inplace(false)));
            in_ch = spec;
        }
    }
    register_module("trunk", trunk_);
    taps_ = {13, 22}; // relu3_2, relu4_2

    if (!weights_path.empty()) {
        auto archive = TensorArchive::load(weights_path);
        load_module(archive, "vgg", *this);
        pretrained_ = true;
    }
    for (auto& p : parameters()) {
        p.set_requires_grad(false);
    }
    eval();
}

std::vector<torch::Tensor> Vgg19FeaturesImpl::forward(const torch::Tensor& image) {
    auto x01 = (image + 1.0) / 2.0;
    auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1}).to(image.device());
    auto std = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1}).to(image.device());
    auto x = (x01 - mean) / std;

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

} // namespace wrib
