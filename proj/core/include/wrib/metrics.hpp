#ifndef WRIB_METRICS_HPP
#define WRIB_METRICS_HPP

#include <torch/torch.h>

#include "wrib/inception.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wrib {

// Central 256 x 512 crop of a 256 x 768 panorama: the evaluation region
// covering the generated middle plus half of each conditioning side.
torch::Tensor center_crop_eval(const torch::Tensor& panorama);

// Frechet distance between Gaussians fitted to two activation sets
// (rows = samples). Computed in double precision.
double compute_fid(const torch::Tensor& feats_a, const torch::Tensor& feats_b);

struct KidResult {
    double mean = 0.0;
    double std = 0.0;
};

// Kernel inception distance with the polynomial kernel (x.y/d + 1)^3,
// unbiased MMD^2 over `subsets` random subsets of size `subset_size`.
KidResult compute_kid(const torch::Tensor& feats_a, const torch::Tensor& feats_b,
                      int64_t subsets = 100, int64_t subset_size = 100, uint64_t seed = 0);

struct MetricsReport {
    double fid = 0.0;
    double kid_mean = 0.0;
    double kid_std = 0.0;
    int64_t n_images = 0;
    std::string protocol_tag;

    std::string to_json() const;
};

// Batched 2048-dim activations for a stack of images in [-1, 1].
torch::Tensor inception_features(InceptionV3Features& net, const std::vector<torch::Tensor>& images,
                                 int64_t batch_size = 8);

} // namespace wrib

#endif // WRIB_METRICS_HPP
