#ifndef WRIB_INCEPTION_HPP
#define WRIB_INCEPTION_HPP

#include <torch/torch.h>

#include <string>

namespace wrib {

// Inception-v3 trunk up to the global average pool, emitting the
// standard 2048-dim activation used by the distribution metrics.
// Layer names follow the common torchvision convention so exported
// weight archives map one to one. Without an archive the filters are
// seeded randomly but deterministically: metric values are then only
// comparable within one build, which is all the tests need.
class InceptionV3FeaturesImpl : public torch::nn::Module {
public:
    explicit InceptionV3FeaturesImpl(const std::string& weights_path = {});

    // Input in [-1, 1], any spatial size; resized internally to 299 x 299
    // with bilinear interpolation. Returns N x 2048.
    torch::Tensor forward(const torch::Tensor& image);

    bool pretrained() const { return pretrained_; }

private:
    torch::nn::Sequential trunk_{nullptr};
    bool pretrained_ = false;
};
TORCH_MODULE(InceptionV3Features);

} // namespace wrib

#endif // WRIB_INCEPTION_HPP
