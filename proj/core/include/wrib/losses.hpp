#ifndef WRIB_LOSSES_HPP
#define WRIB_LOSSES_HPP

#include <torch/torch.h>

#include "wrib/vgg.hpp"

namespace wrib {

// Spatial weighting for the self-reconstruction middle term: pixels near
// either seam between the inputs and the generated middle count more.
// Computed in double precision; shape 1 x 1 x 1 x width.
torch::Tensor weight_mask(int64_t width, double sigma_divisor = 4.0);

// Single-column value of the mask above, for spot checks.
double mask_value(int64_t x, int64_t width, double sigma_divisor = 4.0);

// Mean squared error over all elements (the ||.||_2 convention used
// throughout the reconstruction terms).
torch::Tensor mse(const torch::Tensor& a, const torch::Tensor& b);

// Self-reconstruction pixel loss: MSE on the outer thirds plus
// seam-weighted MSE (mask applied inside the square) on the middle.
torch::Tensor pixel_loss_sr(const torch::Tensor& pred, const torch::Tensor& left,
                            const torch::Tensor& mid, const torch::Tensor& right);

// Fine-tuning pixel loss: the same without the middle term.
torch::Tensor pixel_loss_ft(const torch::Tensor& pred, const torch::Tensor& left,
                            const torch::Tensor& right);

// Feature reconstruction: MSE between the predicted middle bottleneck
// and the encoder feature of the real middle (target detached).
torch::Tensor feat_rec_loss(const torch::Tensor& f_mid, const torch::Tensor& target_feat);

// Feature consistency over the three aligned pairs: encoder left vs the
// backward far prediction, the two middle predictions against each
// other, and the forward far prediction vs encoder right.
torch::Tensor feat_con_loss(const torch::Tensor& fwd_mid, const torch::Tensor& bwd_mid,
                            const torch::Tensor& fwd_right, const torch::Tensor& bwd_left,
                            const torch::Tensor& f_left, const torch::Tensor& f_right);

struct IdmrfOptions {
    int64_t patch = 3;
    int64_t stride = 1;
    double epsilon = 1e-5;
    double bandwidth = 0.5;
};

// Relative-similarity texture matching on one feature pair;
// `gen`/`target` are N x C x H x W with the target detached inside.
torch::Tensor idmrf_layer_loss(const torch::Tensor& gen, const torch::Tensor& target,
                               const IdmrfOptions& options = {});

// Implicit diversified MRF loss over the relu3_2 and relu4_2 features of
// a frozen VGG-19, summed across layers.
torch::Tensor idmrf_loss(Vgg19Features& vgg, const torch::Tensor& pred,
                         const torch::Tensor& target, const IdmrfOptions& options = {});

} // namespace wrib

#endif // WRIB_LOSSES_HPP
