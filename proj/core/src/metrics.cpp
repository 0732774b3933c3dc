#include "wrib/metrics.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"
#include "wrib/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

namespace wrib {
namespace {

std::string render_json_double(double v) {
    if (!std::isfinite(v)) {
        return "null";
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string escape_json(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c);
    }
    return out;
}

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// (numerical noise) clamped to zero.
torch::Tensor psd_sqrt(const torch::Tensor& m) {
    auto [eigvals, eigvecs] = torch::linalg_eigh(m);
    auto roots = eigvals.clamp_min(0.0).sqrt();
    return eigvecs.matmul(torch::diag(roots)).matmul(eigvecs.t());
}

struct Moments {
    torch::Tensor mean; // d
    torch::Tensor cov;  // d x d
};

Moments fit_gaussian(const torch::Tensor& feats) {
    const int64_t n = feats.size(0);
    auto x = feats.to(torch::kFloat64);
    auto mean = x.mean(0);
    auto centered = x - mean.unsqueeze(0);
    auto cov = centered.t().matmul(centered) / static_cast<double>(n - 1);
    return {mean, cov};
}

void check_features(const torch::Tensor& feats, const char* side) {
    if (!feats.defined() || feats.numel() == 0) {
        throw EmptyInput(std::string("metrics: empty feature set (") + side + ")");
    }
    if (feats.dim() != 2) {
        throw ShapeMismatch("metrics: features must be NxD");
    }
    if (feats.size(0) < 2) {
        throw DegenerateInput(std::string("metrics: need at least 2 samples (") + side + ")");
    }
    if (!feats.isfinite().all().item<bool>()) {
        throw DegenerateInput(std::string("metrics: non-finite features (") + side + ")");
    }
}

} // namespace

torch::Tensor center_crop_eval(const torch::Tensor& panorama) {
    if (panorama.size(-1) != kPanoramaWidth) {
        throw ShapeMismatch("center_crop_eval expects width " +
                            std::to_string(kPanoramaWidth));
    }
    return panorama.narrow(panorama.dim() - 1, protocol::kEvalCropLeft,
                           protocol::kEvalCropWidth);
}

double compute_fid(const torch::Tensor& feats_a, const torch::Tensor& feats_b) {
    check_features(feats_a, "a");
    check_features(feats_b, "b");
    if (feats_a.size(1) != feats_b.size(1)) {
        throw ShapeMismatch("fid: feature dimensions differ");
    }
    auto a = fit_gaussian(feats_a);
    auto b = fit_gaussian(feats_b);

    auto diff = a.mean - b.mean;
    const double mean_term = diff.dot(diff).item<double>();
    auto sqrt_a = psd_sqrt(a.cov);
    auto inner = sqrt_a.matmul(b.cov).matmul(sqrt_a);
    auto [eigvals, eigvecs] = torch::linalg_eigh((inner + inner.t()) / 2.0);
    const double trace_sqrt = eigvals.clamp_min(0.0).sqrt().sum().item<double>();
    return mean_term + a.cov.diagonal().sum().item<double>() +
           b.cov.diagonal().sum().item<double>() - 2.0 * trace_sqrt;
}

KidResult compute_kid(const torch::Tensor& feats_a, const torch::Tensor& feats_b,
                      int64_t subsets, int64_t subset_size, uint64_t seed) {
    check_features(feats_a, "a");
    check_features(feats_b, "b");
    if (feats_a.size(1) != feats_b.size(1)) {
        throw ShapeMismatch("kid: feature dimensions differ");
    }
    const int64_t na = feats_a.size(0);
    const int64_t nb = feats_b.size(0);
    if (subset_size > std::min(na, nb)) {
        throw SubsetTooLarge("kid: subset size " + std::to_string(subset_size) +
                             " exceeds the smaller feature set (" +
                             std::to_string(std::min(na, nb)) + ")");
    }
    const int64_t m = subset_size;
    if (m < 2) {
        throw SubsetTooLarge("kid: subset size must be at least 2");
    }
    const double d = static_cast<double>(feats_a.size(1));
    auto a = feats_a.to(torch::kFloat64);
    auto b = feats_b.to(torch::kFloat64);

    std::mt19937_64 rng(seed);
    auto pick = [&](int64_t n) {
        std::vector<int64_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(m));
        return torch::tensor(idx, torch::kInt64);
    };

    std::vector<double> estimates;
    estimates.reserve(static_cast<std::size_t>(subsets));
    for (int64_t s = 0; s < subsets; ++s) {
        auto x = a.index_select(0, pick(na));
        auto y = b.index_select(0, pick(nb));
        auto kxx = (x.matmul(x.t()) / d + 1.0).pow(3);
        auto kyy = (y.matmul(y.t()) / d + 1.0).pow(3);
        auto kxy = (x.matmul(y.t()) / d + 1.0).pow(3);
        const double md = static_cast<double>(m);
        const double sum_xx = (kxx.sum() - kxx.diagonal().sum()).item<double>();
        const double sum_yy = (kyy.sum() - kyy.diagonal().sum()).item<double>();
        const double sum_xy = kxy.sum().item<double>();
        estimates.push_back(sum_xx / (md * (md - 1.0)) + sum_yy / (md * (md - 1.0)) -
                            2.0 * sum_xy / (md * md));
    }
    KidResult out;
    for (double e : estimates) {
        out.mean += e;
    }
    out.mean /= static_cast<double>(estimates.size());
    if (estimates.size() > 1) {
        double ss = 0.0;
        for (double e : estimates) {
            ss += (e - out.mean) * (e - out.mean);
        }
        out.std = std::sqrt(ss / static_cast<double>(estimates.size() - 1));
    }
    return out;
}

std::string MetricsReport::to_json() const {
    std::string out = "{";
    out += "\"fid\": " + render_json_double(fid) + ", ";
    out += "\"kid_mean\": " + render_json_double(kid_mean) + ", ";
    out += "\"kid_std\": " + render_json_double(kid_std) + ", ";
    out += "\"n_images\": " + std::to_string(n_images) + ", ";
    out += "\"protocol_tag\": \"" + escape_json(protocol_tag) + "\"";
    out += "}";
    return out;
}

torch::Tensor inception_features(InceptionV3Features& net,
                                 const std::vector<torch::Tensor>& images, int64_t batch_size) {
    if (images.empty()) {
        throw EmptyInput("inception_features: no images");
    }
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> chunks;
    for (std::size_t start = 0; start < images.size();
         start += static_cast<std::size_t>(batch_size)) {
        const auto end = std::min(images.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<torch::Tensor> batch(images.begin() + static_cast<std::ptrdiff_t>(start),
                                         images.begin() + static_cast<std::ptrdiff_t>(end));
        chunks.push_back(net->forward(torch::stack(batch, 0)));
    }
    return torch::cat(chunks, 0);
}

} // namespace wrib
