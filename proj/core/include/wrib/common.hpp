#ifndef WRIB_COMMON_HPP
#define WRIB_COMMON_HPP

#include <torch/torch.h>

#include <cstdint>

namespace wrib {

// Canonical geometry of the blending task: two 256x256 inputs, one
// 256x768 panorama whose thirds are [left | mid | right].
inline constexpr int64_t kInputSize = 256;
inline constexpr int64_t kPanoramaWidth = 3 * kInputSize;
inline constexpr int64_t kDownsampleFactor = 32;
inline constexpr int64_t kBottleneckSize = kInputSize / kDownsampleFactor; // 8

void seed_all(uint64_t seed);

// Runs a block under a fixed RNG seed and restores the previous state on
// exit, so module construction inside does not disturb the global stream.
class RngScope {
public:
    explicit RngScope(uint64_t seed);
    ~RngScope();
    RngScope(const RngScope&) = delete;
    RngScope& operator=(const RngScope&) = delete;

private:
    torch::Tensor saved_state_;
};

// PSNR in dB between two images in model range [-1, 1], computed on the
// equivalent [0, 1] scale (peak = 1).
double psnr_model_range(const torch::Tensor& a, const torch::Tensor& b);

// Splits a panorama-shaped tensor (..., W) into equal thirds along the
// last dimension.
struct Thirds {
    torch::Tensor left, mid, right;
};
Thirds split_thirds(const torch::Tensor& panorama);

} // namespace wrib

#endif // WRIB_COMMON_HPP
