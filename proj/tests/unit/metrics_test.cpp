#include "wrib/metrics.hpp"

#include "wrib/errors.hpp"
#include "wrib/protocol.hpp"

#include <gtest/gtest.h>
#include <torch/torch.h>

#include <cmath>
#include <vector>

namespace {

TEST(CenterCropEval, SpansTheMiddleColumns) {
    auto pano = torch::arange(3 * 256 * 768, torch::kFloat32).reshape({1, 3, 256, 768});
    auto crop = wrib::center_crop_eval(pano);
    EXPECT_EQ(crop.sizes(), (std::vector<int64_t>{1, 3, 256, 512}));
    EXPECT_TRUE(torch::equal(crop, pano.narrow(-1, 128, 512)));

    auto unbatched = wrib::center_crop_eval(pano.squeeze(0));
    EXPECT_TRUE(torch::equal(unbatched, pano.squeeze(0).narrow(-1, 128, 512)));

    auto batched = wrib::center_crop_eval(torch::rand({4, 3, 256, 768}));
    EXPECT_EQ(batched.sizes(), (std::vector<int64_t>{4, 3, 256, 512}));
}

TEST(CenterCropEval, RejectsWrongWidth) {
    EXPECT_THROW(wrib::center_crop_eval(torch::rand({1, 3, 256, 512})), wrib::ShapeMismatch);
}

TEST(Fid, IdenticalSetsScoreNearZero) {
    torch::manual_seed(40);
    auto feats = torch::randn({64, 16});
    EXPECT_LT(wrib::compute_fid(feats, feats), 1e-3);
}

TEST(Fid, OneDimensionalAnalyticCase) {
    // N(0,1) vs N(2,1): squared mean gap 4, matched variances
    torch::manual_seed(41);
    auto a = torch::randn({100000, 1}, torch::kFloat64);
    auto b = torch::randn({100000, 1}, torch::kFloat64) + 2.0;
    EXPECT_NEAR(wrib::compute_fid(a, b), 4.0, 0.1);
}

TEST(Fid, MatchesTheClosedFormForAScaledShiftedCopy) {
    // with b = 2a + 3 the sample covariances commute exactly, so
    // fid = |mu_a - mu_b|^2 + tr(cov_a) with no asymptotics involved
    torch::manual_seed(42);
    const int64_t n = 50, d = 6;
    auto a = torch::randn({n, d}, torch::kFloat64);
    auto b = 2.0 * a + 3.0;

    double expected = 0.0;
    std::vector<double> mean_a(d, 0.0), mean_b(d, 0.0);
    for (int64_t j = 0; j < d; ++j) {
        for (int64_t i = 0; i < n; ++i) {
            mean_a[static_cast<std::size_t>(j)] += a[i][j].item<double>() / n;
            mean_b[static_cast<std::size_t>(j)] += b[i][j].item<double>() / n;
        }
    }
    for (int64_t j = 0; j < d; ++j) {
        const double gap = mean_a[static_cast<std::size_t>(j)] - mean_b[static_cast<std::size_t>(j)];
        expected += gap * gap;
        double var = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const double c = a[i][j].item<double>() - mean_a[static_cast<std::size_t>(j)];
            var += c * c / (n - 1);
        }
        expected += var; // tr(cov_a) + 4 tr(cov_a) - 2 * 2 tr(cov_a)
    }
    const double fid = wrib::compute_fid(a, b);
    EXPECT_NEAR(fid, expected, 1e-6 * std::max(1.0, expected));
}

TEST(Fid, IsSymmetric) {
    torch::manual_seed(43);
    auto a = torch::randn({40, 8});
    auto b = torch::randn({50, 8}) + 1.0;
    EXPECT_NEAR(wrib::compute_fid(a, b), wrib::compute_fid(b, a), 1e-6);
}

TEST(Fid, GuardsAgainstUnusableInput) {
    auto good = torch::randn({10, 4});
    EXPECT_THROW(wrib::compute_fid(torch::empty({0, 4}), good), wrib::EmptyInput);
    EXPECT_THROW(wrib::compute_fid(torch::randn({1, 4}), good), wrib::DegenerateInput);
    auto poisoned = good.clone();
    poisoned[0][0] = std::nan("");
    EXPECT_THROW(wrib::compute_fid(poisoned, good), wrib::DegenerateInput);
    EXPECT_THROW(wrib::compute_fid(torch::randn({10}), good), wrib::ShapeMismatch);
    EXPECT_THROW(wrib::compute_fid(torch::randn({10, 5}), good), wrib::ShapeMismatch);
}

// With subset_size equal to both set sizes every subset is the full set, so
// the estimator must equal a quadratic-time oracle computed with raw loops.
TEST(Kid, MatchesABruteForceOracleOnFullSubsets) {
    torch::manual_seed(44);
    const int64_t m = 40, d = 16;
    auto a = torch::randn({m, d}, torch::kFloat64);
    auto b = torch::randn({m, d}, torch::kFloat64) + 0.3;

    auto kernel = [&](const torch::Tensor& x, const torch::Tensor& y) {
        double dot = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            dot += x[j].item<double>() * y[j].item<double>();
        }
        return std::pow(dot / d + 1.0, 3.0);
    };
    double sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < m; ++j) {
            if (i != j) {
                sum_aa += kernel(a[i], a[j]);
                sum_bb += kernel(b[i], b[j]);
            }
            sum_ab += kernel(a[i], b[j]);
        }
    }
    const double md = static_cast<double>(m);
    const double oracle =
        sum_aa / (md * (md - 1)) + sum_bb / (md * (md - 1)) - 2.0 * sum_ab / (md * md);

    auto result = wrib::compute_kid(a, b, /*subsets=*/3, /*subset_size=*/m, /*seed=*/5);
    EXPECT_NEAR(result.mean, oracle, 1e-9);
    EXPECT_LT(result.std, 1e-9);
}

TEST(Kid, NullCaseStaysWithinThreeSigma) {
    torch::manual_seed(45);
    auto a = torch::randn({400, 8});
    auto b = torch::randn({400, 8});
    auto result = wrib::compute_kid(a, b, 100, 100, 7);
    EXPECT_GT(result.std, 0.0);
    EXPECT_LT(std::abs(result.mean), 3.0 * result.std);
}

TEST(Kid, SameSeedSameEstimate) {
    torch::manual_seed(46);
    auto a = torch::randn({60, 8});
    auto b = torch::randn({80, 8});
    auto r1 = wrib::compute_kid(a, b, 10, 20, 9);
    auto r2 = wrib::compute_kid(a, b, 10, 20, 9);
    EXPECT_EQ(r1.mean, r2.mean);
    EXPECT_EQ(r1.std, r2.std);
}

TEST(Kid, GuardsAgainstUnusableInput) {
    auto a = torch::randn({30, 4});
    auto b = torch::randn({20, 4});
    EXPECT_THROW(wrib::compute_kid(a, b, 10, 25, 0), wrib::SubsetTooLarge);
    EXPECT_THROW(wrib::compute_kid(a, b, 10, 1, 0), wrib::SubsetTooLarge);
    EXPECT_THROW(wrib::compute_kid(torch::empty({0, 4}), b, 10, 5, 0), wrib::EmptyInput);
    EXPECT_THROW(wrib::compute_kid(a, torch::randn({20, 5}), 10, 5, 0), wrib::ShapeMismatch);
}

TEST(InceptionFeatures, EmitsStableBatchIndependentActivations) {
    torch::manual_seed(47);
    wrib::InceptionV3Features net;
    net->eval();
    std::vector<torch::Tensor> images;
    for (int i = 0; i < 3; ++i) {
        images.push_back(torch::rand({3, 256, 512}) * 2 - 1);
    }
    auto batched = wrib::inception_features(net, images, 8);
    EXPECT_EQ(batched.sizes(), (std::vector<int64_t>{3, 2048}));
    auto one_by_one = wrib::inception_features(net, images, 1);
    EXPECT_TRUE(torch::allclose(batched, one_by_one, 1e-4, 1e-4));
}

TEST(MetricsReport, SerializesEveryField) {
    wrib::MetricsReport report;
    report.fid = 1.5;
    report.kid_mean = 0.01;
    report.kid_std = 0.002;
    report.n_images = 42;
    report.protocol_tag = wrib::protocol::kProtocolTag;
    auto json = report.to_json();
    EXPECT_NE(json.find("\"fid\": 1.5"), std::string::npos) << json;
    EXPECT_NE(json.find("\"kid_mean\": 0.01"), std::string::npos) << json;
    EXPECT_NE(json.find("\"kid_std\": 0.002"), std::string::npos) << json;
    EXPECT_NE(json.find("\"n_images\": 42"), std::string::npos) << json;
    EXPECT_NE(json.find("scenery-center512-v1"), std::string::npos) << json;
}

} // namespace
