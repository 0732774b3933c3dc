#ifndef WRIB_LPIPS_HPP
#define WRIB_LPIPS_HPP

#include <torch/torch.h>

#include <string>
#include <vector>

namespace wrib {

// Learned perceptual distance on AlexNet features: unit-normalize each
// activation across channels, square the difference, weight by the
// calibration 1x1 convolutions, average spatially, sum over layers.
// Used for mining visually close training pairs. Weights come from an
// exported archive; the seeded random fallback still yields a valid
// (symmetric, zero on identical inputs) distance.
class LpipsImpl : public torch::nn::Module {
public:
    explicit LpipsImpl(const std::string& weights_path = {});

    // a, b: N x 3 x H x W in [-1, 1]. Returns N distances.
    torch::Tensor forward(const torch::Tensor& a, const torch::Tensor& b);

    bool pretrained() const { return pretrained_; }

private:
    std::vector<torch::Tensor> features(const torch::Tensor& image);

    torch::nn::Sequential trunk_{nullptr};
    std::vector<int64_t> taps_;
    std::vector<torch::Tensor> lin_weights_; // per-layer channel weights
    bool pretrained_ = false;
};
TORCH_MODULE(Lpips);

} // namespace wrib

#endif // WRIB_LPIPS_HPP
