#include "wrib/common.hpp"

#include "wrib/errors.hpp"

#include <cmath>

namespace wrib {

void seed_all(uint64_t seed) {
    torch::manual_seed(seed);
}

RngScope::RngScope(uint64_t seed) {
    auto gen = at::detail::getDefaultCPUGenerator(); // copies share the impl
    saved_state_ = gen.get_state();
    torch::manual_seed(seed);
}

RngScope::~RngScope() {
    auto gen = at::detail::getDefaultCPUGenerator();
    gen.set_state(saved_state_);
}

double psnr_model_range(const torch::Tensor& a, const torch::Tensor& b) {
    if (a.sizes() != b.sizes()) {
        throw ShapeMismatch("psnr: operand shapes differ");
    }
    // [-1,1] -> [0,1] halves every difference, so scale MSE by 1/4.
    const double mse =
        (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>() / 4.0;
    if (mse <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

Thirds split_thirds(const torch::Tensor& panorama) {
    const int64_t w = panorama.size(-1);
    if (w % 3 != 0) {
        throw IndivisibleWidth("split_thirds: width " + std::to_string(w) +
                               " is not divisible by 3");
    }
    const int64_t t = w / 3;
    const int64_t dim = panorama.dim() - 1;
    return Thirds{panorama.narrow(dim, 0, t), panorama.narrow(dim, t, t),
                  panorama.narrow(dim, 2 * t, t)};
}

} // namespace wrib
