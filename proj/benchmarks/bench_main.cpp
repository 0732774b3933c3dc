#include "wrib/attention.hpp"
#include "wrib/bct.hpp"
#include "wrib/config.hpp"
#include "wrib/generator.hpp"
#include "wrib/losses.hpp"
#include "wrib/metrics.hpp"
#include "wrib/training.hpp"

#include <benchmark/benchmark.h>
#include <torch/torch.h>

namespace {

void bm_weight_mask(benchmark::State& state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(wrib::weight_mask(state.range(0)));
    }
}
BENCHMARK(bm_weight_mask)->Arg(256)->Arg(1024);

void bm_pixel_loss_sr(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    torch::manual_seed(0);
    auto pred = torch::rand({4, 3, 256, 768});
    auto left = torch::rand({4, 3, 256, 256});
    auto mid = torch::rand({4, 3, 256, 256});
    auto right = torch::rand({4, 3, 256, 256});
    for (auto _ : state) {
        benchmark::DoNotOptimize(wrib::pixel_loss_sr(pred, left, mid, right));
    }
}
BENCHMARK(bm_pixel_loss_sr);

void bm_contextual_attention(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    torch::manual_seed(0);
    const int64_t side = state.range(0);
    auto query = torch::rand({128, side, side});
    auto keys = wrib::extract_patches(torch::rand({128, side, side}), 3, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(wrib::contextual_attention(query, keys, 10.0));
    }
}
BENCHMARK(bm_contextual_attention)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void bm_bct_forward(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    torch::manual_seed(0);
    wrib::BctOptions options;
    options.channels = 1024;
    options.height = 8;
    options.width = 8;
    options.K = 4;
    options.hidden = 1024;
    options.reduce_channels = 512;
    wrib::Bct bct(options);
    bct->eval();
    auto a = torch::rand({1, 1024, 8, 8});
    auto b = torch::rand({1, 1024, 8, 8});
    for (auto _ : state) {
        benchmark::DoNotOptimize(bct->forward(a, b));
    }
}
BENCHMARK(bm_bct_forward)->Unit(benchmark::kMillisecond);

void bm_generator_forward(benchmark::State& state) {
    torch::NoGradGuard no_grad;
    torch::manual_seed(0);
    wrib::TrainConfig config;
    config.bottleneck_channels = state.range(0);
    wrib::Generator gen(config);
    gen->eval();
    auto a = torch::rand({1, 3, 256, 256}) * 2 - 1;
    auto b = torch::rand({1, 3, 256, 256}) * 2 - 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gen->forward(a, b));
    }
}
BENCHMARK(bm_generator_forward)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond);

void bm_compute_fid(benchmark::State& state) {
    torch::manual_seed(0);
    const int64_t n = state.range(0);
    auto a = torch::randn({n, 2048});
    auto b = torch::randn({n, 2048}) + 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(wrib::compute_fid(a, b));
    }
}
BENCHMARK(bm_compute_fid)->Arg(1000)->Unit(benchmark::kMillisecond);

void bm_compute_kid(benchmark::State& state) {
    torch::manual_seed(0);
    auto a = torch::randn({1000, 2048});
    auto b = torch::randn({1000, 2048}) + 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(wrib::compute_kid(a, b));
    }
}
BENCHMARK(bm_compute_kid)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
