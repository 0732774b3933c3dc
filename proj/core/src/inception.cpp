#include "wrib/inception.hpp"

#include "wrib/common.hpp"
#include "wrib/tensor_archive.hpp"

#include <utility>

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace wrib {
namespace {

using EA = torch::ExpandingArray<2>;

// conv (no bias) + batch norm, the elementary unit of the v3 topology
class BasicConv2dImpl : public nn::Module {
public:
    BasicConv2dImpl(int64_t in_ch, int64_t out_ch, torch::ExpandingArray<2> kernel,
                    torch::ExpandingArray<2> stride = 1, torch::ExpandingArray<2> padding = 0) {
        conv = register_module(
            "conv", nn::Conv2d(
                        nn::Conv2dOptions(in_ch, out_ch, kernel).stride(stride).padding(padding).bias(false)));
        bn = register_module("bn", nn::BatchNorm2d(nn::BatchNorm2dOptions(out_ch).eps(0.001)));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        return torch::relu(bn->forward(conv->forward(x)));
    }
    nn::Conv2d conv{nullptr};
    nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(BasicConv2d);

class InceptionAImpl : public nn::Module {
public:
    InceptionAImpl(int64_t in_ch, int64_t pool_features) {
        branch1x1 = register_module("branch1x1", BasicConv2d(in_ch, 64, 1));
        branch5x5_1 = register_module("branch5x5_1", BasicConv2d(in_ch, 48, 1));
        branch5x5_2 = register_module("branch5x5_2", BasicConv2d(48, 64, 5, 1, 2));
        branch3x3dbl_1 = register_module("branch3x3dbl_1", BasicConv2d(in_ch, 64, 1));
        branch3x3dbl_2 = register_module("branch3x3dbl_2", BasicConv2d(64, 96, 3, 1, 1));
        branch3x3dbl_3 = register_module("branch3x3dbl_3", BasicConv2d(96, 96, 3, 1, 1));
        branch_pool = register_module("branch_pool", BasicConv2d(in_ch, pool_features, 1));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto b1 = branch1x1->forward(x);
        auto b5 = branch5x5_2->forward(branch5x5_1->forward(x));
        auto b3 = branch3x3dbl_3->forward(branch3x3dbl_2->forward(branch3x3dbl_1->forward(x)));
        auto bp = branch_pool->forward(
            F::avg_pool2d(x, F::AvgPool2dFuncOptions(3).stride(1).padding(1)));
        return torch::cat({b1, b5, b3, bp}, 1);
    }
    BasicConv2d branch1x1{nullptr}, branch5x5_1{nullptr}, branch5x5_2{nullptr},
        branch3x3dbl_1{nullptr}, branch3x3dbl_2{nullptr}, branch3x3dbl_3{nullptr},
        branch_pool{nullptr};
};
TORCH_MODULE(InceptionA);

class InceptionBImpl : public nn::Module {
public:
    explicit InceptionBImpl(int64_t in_ch) {
        branch3x3 = register_module("branch3x3", BasicConv2d(in_ch, 384, 3, 2));
        branch3x3dbl_1 = register_module("branch3x3dbl_1", BasicConv2d(in_ch, 64, 1));
        branch3x3dbl_2 = register_module("branch3x3dbl_2", BasicConv2d(64, 96, 3, 1, 1));
        branch3x3dbl_3 = register_module("branch3x3dbl_3", BasicConv2d(96, 96, 3, 2));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto b3 = branch3x3->forward(x);
        auto bd = branch3x3dbl_3->forward(branch3x3dbl_2->forward(branch3x3dbl_1->forward(x)));
        auto bp = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2));
        return torch::cat({b3, bd, bp}, 1);
    }
    BasicConv2d branch3x3{nullptr}, branch3x3dbl_1{nullptr}, branch3x3dbl_2{nullptr},
        branch3x3dbl_3{nullptr};
};
TORCH_MODULE(InceptionB);

class InceptionCImpl : public nn::Module {
public:
    InceptionCImpl(int64_t in_ch, int64_t c7) {
        branch1x1 = register_module("branch1x1", BasicConv2d(in_ch, 192, 1));
        branch7x7_1 = register_module("branch7x7_1", BasicConv2d(in_ch, c7, 1));
        branch7x7_2 = register_module("branch7x7_2",
                                      BasicConv2d(c7, c7, EA({1, 7}), 1, EA({0, 3})));
        branch7x7_3 = register_module("branch7x7_3",
                                      BasicConv2d(c7, 192, EA({7, 1}), 1, EA({3, 0})));
        branch7x7dbl_1 = register_module("branch7x7dbl_1", BasicConv2d(in_ch, c7, 1));
        branch7x7dbl_2 = register_module("branch7x7dbl_2",
                                         BasicConv2d(c7, c7, EA({7, 1}), 1, EA({3, 0})));
        branch7x7dbl_3 = register_module("branch7x7dbl_3",
                                         BasicConv2d(c7, c7, EA({1, 7}), 1, EA({0, 3})));
        branch7x7dbl_4 = register_module("branch7x7dbl_4",
                                         BasicConv2d(c7, c7, EA({7, 1}), 1, EA({3, 0})));
        branch7x7dbl_5 = register_module("branch7x7dbl_5",
                                         BasicConv2d(c7, 192, EA({1, 7}), 1, EA({0, 3})));
        branch_pool = register_module("branch_pool", BasicConv2d(in_ch, 192, 1));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto b1 = branch1x1->forward(x);
        auto b7 = branch7x7_3->forward(branch7x7_2->forward(branch7x7_1->forward(x)));
        auto bd = branch7x7dbl_5->forward(branch7x7dbl_4->forward(
            branch7x7dbl_3->forward(branch7x7dbl_2->forward(branch7x7dbl_1->forward(x)))));
        auto bp = branch_pool->forward(
            F::avg_pool2d(x, F::AvgPool2dFuncOptions(3).stride(1).padding(1)));
        return torch::cat({b1, b7, bd, bp}, 1);
    }
    BasicConv2d branch1x1{nullptr}, branch7x7_1{nullptr}, branch7x7_2{nullptr},
        branch7x7_3{nullptr}, branch7x7dbl_1{nullptr}, branch7x7dbl_2{nullptr},
        branch7x7dbl_3{nullptr}, branch7x7dbl_4{nullptr}, branch7x7dbl_5{nullptr},
        branch_pool{nullptr};
};
TORCH_MODULE(InceptionC);

class InceptionDImpl : public nn::Module {
public:
    explicit InceptionDImpl(int64_t in_ch) {
        branch3x3_1 = register_module("branch3x3_1", BasicConv2d(in_ch, 192, 1));
        branch3x3_2 = register_module("branch3x3_2", BasicConv2d(192, 320, 3, 2));
        branch7x7x3_1 = register_module("branch7x7x3_1", BasicConv2d(in_ch, 192, 1));
        branch7x7x3_2 = register_module("branch7x7x3_2",
                                        BasicConv2d(192, 192, EA({1, 7}), 1, EA({0, 3})));
        branch7x7x3_3 = register_module("branch7x7x3_3",
                                        BasicConv2d(192, 192, EA({7, 1}), 1, EA({3, 0})));
        branch7x7x3_4 = register_module("branch7x7x3_4", BasicConv2d(192, 192, 3, 2));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto b3 = branch3x3_2->forward(branch3x3_1->forward(x));
        auto b7 = branch7x7x3_4->forward(
            branch7x7x3_3->forward(branch7x7x3_2->forward(branch7x7x3_1->forward(x))));
        auto bp = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2));
        return torch::cat({b3, b7, bp}, 1);
    }
    BasicConv2d branch3x3_1{nullptr}, branch3x3_2{nullptr}, branch7x7x3_1{nullptr},
        branch7x7x3_2{nullptr}, branch7x7x3_3{nullptr}, branch7x7x3_4{nullptr};
};
TORCH_MODULE(InceptionD);

class InceptionEImpl : public nn::Module {
public:
    explicit InceptionEImpl(int64_t in_ch) {
        branch1x1 = register_module("branch1x1", BasicConv2d(in_ch, 320, 1));
        branch3x3_1 = register_module("branch3x3_1", BasicConv2d(in_ch, 384, 1));
        branch3x3_2a = register_module("branch3x3_2a",
                                       BasicConv2d(384, 384, EA({1, 3}), 1, EA({0, 1})));
        branch3x3_2b = register_module("branch3x3_2b",
                                       BasicConv2d(384, 384, EA({3, 1}), 1, EA({1, 0})));
        branch3x3dbl_1 = register_module("branch3x3dbl_1", BasicConv2d(in_ch, 448, 1));
        branch3x3dbl_2 = register_module("branch3x3dbl_2", BasicConv2d(448, 384, 3, 1, 1));
        branch3x3dbl_3a = register_module("branch3x3dbl_3a",
                                          BasicConv2d(384, 384, EA({1, 3}), 1, EA({0, 1})));
        branch3x3dbl_3b = register_module("branch3x3dbl_3b",
                                          BasicConv2d(384, 384, EA({3, 1}), 1, EA({1, 0})));
        branch_pool = register_module("branch_pool", BasicConv2d(in_ch, 192, 1));
    }
    torch::Tensor forward(const torch::Tensor& x) {
        auto b1 = branch1x1->forward(x);
        auto b3 = branch3x3_1->forward(x);
        b3 = torch::cat({branch3x3_2a->forward(b3), branch3x3_2b->forward(b3)}, 1);
        auto bd = branch3x3dbl_2->forward(branch3x3dbl_1->forward(x));
        bd = torch::cat({branch3x3dbl_3a->forward(bd), branch3x3dbl_3b->forward(bd)}, 1);
        auto bp = branch_pool->forward(
            F::avg_pool2d(x, F::AvgPool2dFuncOptions(3).stride(1).padding(1)));
        return torch::cat({b1, b3, bd, bp}, 1);
    }
    BasicConv2d branch1x1{nullptr}, branch3x3_1{nullptr}, branch3x3_2a{nullptr},
        branch3x3_2b{nullptr}, branch3x3dbl_1{nullptr}, branch3x3dbl_2{nullptr},
        branch3x3dbl_3a{nullptr}, branch3x3dbl_3b{nullptr}, branch_pool{nullptr};
};
TORCH_MODULE(InceptionE);

class TrunkImpl : public nn::Module {
public:
    TrunkImpl() {
        Conv2d_1a_3x3 = register_module("Conv2d_1a_3x3", BasicConv2d(3, 32, 3, 2));
        Conv2d_2a_3x3 = register_module("Conv2d_2a_3x3", BasicConv2d(32, 32, 3));
        Conv2d_2b_3x3 = register_module("Conv2d_2b_3x3", BasicConv2d(32, 64, 3, 1, 1));
        Conv2d_3b_1x1 = register_module("Conv2d_3b_1x1", BasicConv2d(64, 80, 1));
        Conv2d_4a_3x3 = register_module("Conv2d_4a_3x3", BasicConv2d(80, 192, 3));
        Mixed_5b = register_module("Mixed_5b", InceptionA(192, 32));
        Mixed_5c = register_module("Mixed_5c", InceptionA(256, 64));
        Mixed_5d = register_module("Mixed_5d", InceptionA(288, 64));
        Mixed_6a = register_module("Mixed_6a", InceptionB(288));
        Mixed_6b = register_module("Mixed_6b", InceptionC(768, 128));
        Mixed_6c = register_module("Mixed_6c", InceptionC(768, 160));
        Mixed_6d = register_module("Mixed_6d", InceptionC(768, 160));
        Mixed_6e = register_module("Mixed_6e", InceptionC(768, 192));
        Mixed_7a = register_module("Mixed_7a", InceptionD(768));
        Mixed_7b = register_module("Mixed_7b", InceptionE(1280));
        Mixed_7c = register_module("Mixed_7c", InceptionE(2048));
    }
    torch::Tensor forward(const torch::Tensor& x0) {
        auto x = Conv2d_1a_3x3->forward(x0);
        x = Conv2d_2a_3x3->forward(x);
        x = Conv2d_2b_3x3->forward(x);
        x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2));
        x = Conv2d_3b_1x1->forward(x);
        x = Conv2d_4a_3x3->forward(x);
        x = F::max_pool2d(x, F::MaxPool2dFuncOptions(3).stride(2));
        x = Mixed_5b->forward(x);
        x = Mixed_5c->forward(x);
        x = Mixed_5d->forward(x);
        x = Mixed_6a->forward(x);
        x = Mixed_6b->forward(x);
        x = Mixed_6c->forward(x);
        x = Mixed_6d->forward(x);
        x = Mixed_6e->forward(x);
        x = Mixed_7a->forward(x);
        x = Mixed_7b->forward(x);
        x = Mixed_7c->forward(x);
        return F::adaptive_avg_pool2d(x, F::AdaptiveAvgPool2dFuncOptions(1)).flatten(1);
    }
    BasicConv2d Conv2d_1a_3x3{nullptr}, Conv2d_2a_3x3{nullptr}, Conv2d_2b_3x3{nullptr},
        Conv2d_3b_1x1{nullptr}, Conv2d_4a_3x3{nullptr};
    InceptionA Mixed_5b{nullptr}, Mixed_5c{nullptr}, Mixed_5d{nullptr};
    InceptionB Mixed_6a{nullptr};
    InceptionC Mixed_6b{nullptr}, Mixed_6c{nullptr}, Mixed_6d{nullptr}, Mixed_6e{nullptr};
    InceptionD Mixed_7a{nullptr};
    InceptionE Mixed_7b{nullptr};
    InceptionE Mixed_7c{nullptr};
};
TORCH_MODULE(Trunk);

} // namespace

// The public wrapper keeps the trunk behind a pimpl-ish registered child
// so the header stays free of the block definitions.
InceptionV3FeaturesImpl::InceptionV3FeaturesImpl(const std::string& weights_path) {
    RngScope rng(0x1238CE97ULL);
    trunk_ = nn::Sequential(Trunk());
    register_module("net", trunk_);

    if (!weights_path.empty()) {
        auto archive = TensorArchive::load(weights_path);
        load_module(archive, "inception", *this);
        pretrained_ = true;
    }
    for (auto& p : parameters()) {
        p.set_requires_grad(false);
    }
    eval();
}

torch::Tensor InceptionV3FeaturesImpl::forward(const torch::Tensor& image) {
    torch::NoGradGuard no_grad;
    auto x = F::interpolate(image, F::InterpolateFuncOptions()
                                       .size(std::vector<int64_t>{299, 299})
                                       .mode(torch::kBilinear)
                                       .align_corners(false));
    auto x01 = (x + 1.0) / 2.0;
    auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
    auto std = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
    return trunk_->forward((x01 - mean) / std);
}

} // namespace wrib
