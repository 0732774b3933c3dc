#ifndef WRIB_VGG_HPP
#define WRIB_VGG_HPP

#include <torch/torch.h>

#include <string>
#include <vector>

namespace wrib {

// VGG-19 convolutional trunk up to relu4_2, used as a frozen feature
// extractor for the perceptual losses. Weights are loaded from a tensor
// archive produced by tools/export_weights.py; when none is given the
// filters are random but deterministic, which keeps every loss well
// defined (just not perceptually calibrated).
class Vgg19FeaturesImpl : public torch::nn::Module {
public:
    explicit Vgg19FeaturesImpl(const std::string& weights_path = {});

    // Input in [-1, 1]; internally rescaled to the ImageNet statistics.
    // Returns {relu3_2, relu4_2}.
    std::vector<torch::Tensor> forward(const torch::Tensor& image);

    bool pretrained() const { return pretrained_; }

private:
    torch::nn::Sequential trunk_{nullptr};
    std::vector<int64_t> taps_; // indices into trunk_ after which to record
    bool pretrained_ = false;
};
TORCH_MODULE(Vgg19Features);

} // namespace wrib

#endif // WRIB_VGG_HPP
